import matplotlib.pyplot as plt
import numpy as np
from matplotlib import colors
from matplotlib.collections import PolyCollection

from .raster_viz import COLORMAP_NAME


class FlatteningVisualizer:
    """Create comparison figures for flattened textures and distortion maps"""

    def __init__(self):
        plt.style.use('seaborn-v0_8')
        self.fig_size = (15, 5)

    def _panel_axes(self, count, title):
        fig, axes = plt.subplots(1, max(count, 1), figsize=self.fig_size, squeeze=False)
        fig.suptitle(title)
        return fig, axes[0]

    def plot_texture_comparison(self, renderings, title="Flattened textures"):
        """Side-by-side flattened texture images, one panel per algorithm"""
        fig, axes = self._panel_axes(len(renderings), title)
        for ax, (algorithm, image) in zip(axes, renderings.items()):
            if image.is_rgb:
                ax.imshow(image.pixels, interpolation='nearest')
            else:
                ax.imshow(image.pixels, cmap='gray', vmin=0, vmax=255, interpolation='nearest')
            if image.fold_mask.any():
                overlay = np.ma.masked_where(~image.fold_mask, image.fold_mask)
                ax.imshow(overlay, cmap='autumn', alpha=0.5, interpolation='nearest')
            ax.set_title(algorithm)
            ax.set_axis_off()
        plt.tight_layout()
        return fig

    def plot_heatmaps(self, heatmaps, value_range, label, title="Distortion"):
        """Heatmap panels sharing one colorbar"""
        fig, axes = self._panel_axes(len(heatmaps), title)
        for ax, (algorithm, image) in zip(axes, heatmaps.items()):
            ax.imshow(image.pixels, interpolation='nearest')
            ax.set_title(algorithm)
            ax.set_axis_off()
        mappable = plt.cm.ScalarMappable(norm=colors.Normalize(*value_range), cmap=COLORMAP_NAME)
        fig.colorbar(mappable, ax=list(axes), label=label, shrink=0.8)
        return fig

    def plot_uv_layout(self, uv, title=None):
        """Triangle layout in the parameter plane with folded faces in red"""
        fig, ax = plt.subplots(figsize=(self.fig_size[1], self.fig_size[1]))
        polygons = uv.uv[uv.mesh.faces]
        flipped = set(uv.flipped_faces())
        face_colors = ['tab:red' if f in flipped else 'tab:blue' for f in range(uv.mesh.n_faces)]
        ax.add_collection(PolyCollection(polygons, facecolors=face_colors, edgecolors='k',
                                         linewidths=0.3, alpha=0.4))
        ax.autoscale_view()
        ax.set_aspect('equal')
        ax.set_xlabel('u')
        ax.set_ylabel('v')
        ax.set_title(title or f"{uv.mesh.name} ({uv.algorithm.value})")
        ax.grid(True, alpha=0.3)
        return fig

    def plot_metric_summary(self, table, metric_name):
        """Grouped bars: meshes along x, one bar per algorithm"""
        fig, ax = plt.subplots(figsize=(10, 6))
        numeric = table.apply(lambda column: column.map(lambda v: v if isinstance(v, float) else np.nan))
        numeric = numeric.astype(float)
        numeric.plot.bar(ax=ax, rot=0)
        ax.set_xlabel('Mesh')
        ax.set_ylabel(metric_name)
        ax.set_title(f'{metric_name} by algorithm')
        ax.grid(True, alpha=0.3)
        plt.tight_layout()
        return fig

    def save(self, fig, path):
        fig.savefig(path, dpi=100)
        plt.close(fig)
        return path
