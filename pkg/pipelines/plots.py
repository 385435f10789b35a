"""
Figures SVG des pipelines (backend Agg, sans affichage).
"""

from pathlib import Path
from typing import Optional, Sequence, Union

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np

# Identifiants SVG et métadonnées stables d'une exécution à l'autre
plt.rcParams['svg.hashsalt'] = 'centermanifold'
SVG_METADATA = {'Date': None, 'Creator': None}


def _save(fig, output_path: Union[str, Path]) -> Path:
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(output_path, format='svg', bbox_inches='tight', facecolor='white', metadata=SVG_METADATA)
    plt.close(fig)
    return output_path


def plot_sampled_surface(points: np.ndarray, K: np.ndarray, output_path: Union[str, Path],
                         title: str, axes: Sequence[int] = (0, 1)) -> Path:
    """
    Nuage de points d'une surface (projeté sur deux coordonnées) et ensemble K.

    Args:
        points: Points (N, n) de la surface
        K: Points de l'ensemble invariant
        output_path: Fichier SVG
        title: Titre
        axes: Coordonnées affichées
    """
    a, b = axes
    points = np.atleast_2d(points)
    points = points[np.all(np.isfinite(points), axis=1)]
    K = np.atleast_2d(K)
    fig, ax = plt.subplots(figsize=(6, 5))
    ax.scatter(points[:, a], points[:, b], s=2, c='#1f77b4', label='surface')
    ax.scatter(K[:, a], K[:, b], s=20, c='red', edgecolors='darkred', label='K')
    ax.set_xlabel(f"x{a}")
    ax.set_ylabel(f"x{b}")
    ax.set_title(title)
    ax.legend(loc='best')
    return _save(fig, output_path)


def plot_foliation(field_points: np.ndarray, field_angles: np.ndarray, leaves: Sequence[np.ndarray],
                   K: np.ndarray, output_path: Union[str, Path], title: str) -> Path:
    """Champ de droites (segments non orientés) et feuilles intégrées."""
    fig, ax = plt.subplots(figsize=(6, 6))
    if len(field_points):
        u, v = np.cos(field_angles), np.sin(field_angles)
        ax.quiver(field_points[:, 0], field_points[:, 1], u, v, angles='xy', pivot='middle',
                  headwidth=0, headlength=0, headaxislength=0, color='gray', alpha=0.5)
    for leaf in leaves:
        if len(leaf) > 1:
            ax.plot(leaf[:, 0], leaf[:, 1], color='#2ca02c', linewidth=1.0)
    K = np.atleast_2d(K)
    ax.scatter(K[:, 0], K[:, 1], s=20, c='red', edgecolors='darkred', zorder=3)
    ax.set_aspect('equal', adjustable='datalim')
    ax.set_xlabel('x')
    ax.set_ylabel('y')
    ax.set_title(title)
    return _save(fig, output_path)


def plot_profile(x: np.ndarray, values: np.ndarray, output_path: Union[str, Path], title: str,
                 marks: Optional[dict] = None) -> Path:
    """Profil d'une fonction d'une variable, avec des points marqués."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(x, values, color='#1f77b4')
    for label, positions in (marks or {}).items():
        positions = np.ravel(positions)
        ax.scatter(positions, np.zeros_like(positions) if label == 'K' else np.ones_like(positions),
                   s=25, label=label, zorder=3)
    ax.set_xlabel('x')
    ax.set_title(title)
    if marks:
        ax.legend(loc='best')
    return _save(fig, output_path)
