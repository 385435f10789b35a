import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='PipelineRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('created_at', models.DateTimeField(auto_now_add=True, verbose_name='Date de création')),
                ('updated_at', models.DateTimeField(auto_now=True, verbose_name='Dernière modification')),
                ('run_id', models.CharField(max_length=100, unique=True, verbose_name="ID d'exécution")),
                ('subcommand', models.CharField(max_length=20, verbose_name='Sous-commande')),
                ('system', models.CharField(max_length=100, verbose_name='Système')),
                ('seed', models.BigIntegerField(verbose_name='Graine')),
                ('workers', models.PositiveIntegerField(default=1, verbose_name='Threads')),
                ('config_hash', models.CharField(max_length=64, verbose_name='Empreinte SHA-256 de la configuration')),
                ('status', models.CharField(choices=[('running', 'En cours'), ('passed', 'Contrôles réussis'), ('failed', 'Contrôles échoués'), ('error', 'Erreur de configuration ou de convergence')], default='running', max_length=20, verbose_name='Statut')),
                ('message', models.TextField(blank=True, verbose_name='Diagnostic')),
                ('summary', models.JSONField(blank=True, default=dict, verbose_name='Résumé')),
                ('output_path', models.CharField(blank=True, max_length=500, verbose_name='Répertoire de sortie')),
            ],
            options={
                'verbose_name': 'Exécution de pipeline',
                'verbose_name_plural': 'Exécutions de pipelines',
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='CheckRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('created_at', models.DateTimeField(auto_now_add=True, verbose_name='Date de création')),
                ('updated_at', models.DateTimeField(auto_now=True, verbose_name='Dernière modification')),
                ('name', models.CharField(max_length=100, verbose_name='Contrôle')),
                ('passed', models.BooleanField(verbose_name='Réussi')),
                ('measured', models.FloatField(blank=True, null=True, verbose_name='Valeur mesurée')),
                ('tolerance', models.FloatField(blank=True, null=True, verbose_name='Tolérance')),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='checks', to='pipelines.pipelinerun', verbose_name='Exécution')),
            ],
            options={
                'verbose_name': 'Contrôle',
                'verbose_name_plural': 'Contrôles',
                'ordering': ['run', 'name'],
                'unique_together': {('run', 'name')},
            },
        ),
    ]
