from django.apps import AppConfig


class GraphTransformConfig(AppConfig):
    name = 'graph_transform'
