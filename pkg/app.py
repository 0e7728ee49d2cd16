"""
Interface en ligne de commande steklab

Sous-commandes : pack, mesh, solve, sweep, fit, dualnorm, certify.
"""
import json
import logging
import functools

import click
from dotenv import load_dotenv

from core.config import get_settings
from core.errors import SteklabError, UsageError
from core.experiments import emit_results, fit_rate, load_results, run_sweep
from core.fem import (
    SolverSettings,
    assemble_area_mass,
    assemble_boundary_mass,
    assemble_stiffness,
    generalized_eigs,
    solve_poisson_dirichlet,
)
from core.mesh import MeshGrading, fill_holes, mesh_closed_surface, mesh_domain, mesh_quality, read_mesh, write_mesh
from core.packing import DiskPacking, make_domain_spec, select_separated_points
from core.spectra import laplace_spectrum, steklov_normalized
from core.stability import MeasureDiff, dual_norm_dot, dual_norm_full, gap_certificate_sphere, sandwich_constant
from core.surface import make_surface
from models import load_sweep_config

logger = logging.getLogger(__name__)

SURFACE_CHOICES = ['sphere', 'flat-torus', 'square-torus', 'equilateral-torus']


def handle_errors(func):
    """Convertit les erreurs de steklab en erreurs click (code de sortie 1)"""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except SteklabError as e:
            logger.error(f"{type(e).__name__} : {e}")
            raise click.ClickException(str(e)) from e
        except OSError as e:
            raise click.ClickException(f"Erreur d'entrée/sortie : {e}") from e

    return wrapper


def _emit_json(data, out):
    text = json.dumps(data, indent=2)
    if out is None:
        click.echo(text)
    else:
        with open(out, 'w', encoding='utf-8') as fh:
            fh.write(text + "\n")
        click.echo(f"Écrit : {out}")


def _density(m, density, settings):
    """Mesure de bord : uniforme (ρ = 1) ou β issue du problème de Poisson"""
    if density == 'beta':
        return solve_poisson_dirichlet(m, None, settings).beta
    return assemble_boundary_mass(m)


@click.group()
@click.option('--log-level', default=None, help="Niveau de journalisation (défaut : STEKLAB_LOG_LEVEL)")
@click.pass_context
def cli(ctx, log_level):
    """steklab : construction et vérification des domaines perforés de Steklov"""
    load_dotenv()
    level = (log_level or get_settings().log_level).upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format='%(asctime)s - %(levelname)s - %(message)s')
    ctx.ensure_object(dict)


@cli.command()
@click.option('--surface', 'kind', type=click.Choice(SURFACE_CHOICES), default='sphere', show_default=True)
@click.option('--lattice', type=click.Choice(['square', 'equilateral']), default=None)
@click.option('--k', 'k', type=int, required=True, help="Nombre de centres")
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--alpha', type=float, default=1.5, show_default=True, help="Rayons k^{-α}")
@click.option('--out', type=click.Path(dir_okay=False), default=None)
@handle_errors
def pack(kind, lattice, k, seed, alpha, out):
    """Choisit k centres bien séparés et les rayons des trous"""
    s = make_surface(kind, lattice=lattice)
    packing = select_separated_points(s, k, seed)
    spec = make_domain_spec(packing, alpha)
    packing.radii = spec.radii
    packing.alpha = alpha
    if out is None:
        _emit_json(packing.to_dict(), None)
    else:
        packing.save(out)
        click.echo(f"Empilement écrit : {out}")


@cli.command()
@click.option('--packing', 'packing_path', type=click.Path(exists=True, dir_okay=False), default=None)
@click.option('--surface', 'kind', type=click.Choice(SURFACE_CHOICES), default=None,
              help="Maille la surface fermée (sans --packing)")
@click.option('--lattice', type=click.Choice(['square', 'equilateral']), default=None)
@click.option('--alpha', type=float, default=None, help="Exposant des rayons (défaut : celui de l'empilement)")
@click.option('--h', 'h', type=float, default=0.03, show_default=True)
@click.option('--ring-ratio', type=float, default=1.4, show_default=True)
@click.option('--out', type=click.Path(dir_okay=False), required=True)
@handle_errors
def mesh(packing_path, kind, lattice, alpha, h, ring_ratio, out):
    """Maille un domaine perforé (SURFMESH 1)"""
    if packing_path is None and kind is None:
        raise UsageError("Indiquer --packing ou --surface")
    if packing_path is not None:
        packing = DiskPacking.load(packing_path)
        radii = packing.radii if alpha is None else None
        spec = make_domain_spec(packing, packing.alpha if alpha is None else alpha, radii=radii)
        m = mesh_domain(packing.surface, spec, MeshGrading(target_h=h, ring_ratio=ring_ratio))
    else:
        m = mesh_closed_surface(make_surface(kind, lattice=lattice), h)
    write_mesh(m, out)
    quality = mesh_quality(m)
    click.echo(f"{m.n_vertices} sommets, {m.n_triangles} triangles, h_max = {m.h_max:.4g}, "
               f"angle min = {quality.min_angle:.1f}°, χ = {quality.euler_characteristic}")


@cli.command()
@click.option('--mesh', 'mesh_path', type=click.Path(exists=True, dir_okay=False), required=True)
@click.option('--count', type=int, default=10, show_default=True)
@click.option('--density', type=click.Choice(['uniform', 'beta']), default='uniform', show_default=True,
              help="Densité de bord pour Steklov")
@click.option('--rtol', type=float, default=None)
@click.option('--method', type=click.Choice(['cg', 'direct']), default='cg', show_default=True)
@click.option('--out', type=click.Path(dir_okay=False), default=None)
@handle_errors
def solve(mesh_path, count, density, rtol, method, out):
    """Spectre de Laplace (maillage fermé) ou de Steklov (domaine)"""
    m = read_mesh(mesh_path)
    settings = SolverSettings(rtol=rtol, method=method)
    if m.is_closed:
        result = laplace_spectrum(m, None, count, settings)
    else:
        result = steklov_normalized(m, _density(m, density, settings), count, settings)
    _emit_json(result.to_dict(), out)


@cli.command()
@click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False), required=True)
@click.option('--workers', type=int, default=None)
@click.option('--csv', 'csv_path', type=click.Path(dir_okay=False), default=None)
@click.option('--json', 'json_path', type=click.Path(dir_okay=False), default=None)
@handle_errors
def sweep(config_path, workers, csv_path, json_path):
    """Balayage sur k ; code de sortie 0 si et seulement si tous les k réussissent"""
    cfg = load_sweep_config(config_path)
    records = run_sweep(cfg, workers=workers or cfg.workers)
    report = None
    try:
        report = fit_rate(records)
    except UsageError as e:
        logger.warning(f"Ajustement des taux ignoré : {e}")
    csv_path = csv_path or cfg.csv_path
    json_path = json_path or cfg.json_path
    if csv_path is None and json_path is None:
        csv_path = 'results.csv'
    emit_results(records, report, csv_path=csv_path, json_path=json_path)
    failed = [r.k for r in records if not r.ok]
    if report is not None:
        click.echo(f"Modèle retenu : {report.best} (a = {report.log_coefficient:.6g})")
    if failed:
        click.echo(f"k en échec : {failed}", err=True)
        raise SystemExit(1)


@cli.command()
@click.option('--results', 'results_path', type=click.Path(exists=True, dir_okay=False), required=True)
@click.option('--out', type=click.Path(dir_okay=False), default=None)
@handle_errors
def fit(results_path, out):
    """Ajuste le gap Λ₁ − σ̄₁ contre log k/k, 1/k, 1/√k"""
    records, _ = load_results(results_path)
    report = fit_rate(records)
    _emit_json(report.to_dict(), out)


@cli.command()
@click.option('--mesh', 'mesh_path', type=click.Path(exists=True, dir_okay=False), required=True)
@click.option('--count', type=int, default=1, show_default=True)
@click.option('--out', type=click.Path(dir_okay=False), default=None)
@handle_errors
def dualnorm(mesh_path, count, out):
    """Distance duale entre σ₁β et Λ₁·dv sur le maillage rebouché"""
    m = read_mesh(mesh_path)
    if m.is_closed:
        raise UsageError("dualnorm exige un maillage de domaine")
    settings = SolverSettings()
    beta = solve_poisson_dirichlet(m, None, settings).beta
    steklov = steklov_normalized(m, beta, count, settings)
    filled = fill_holes(m)
    K = assemble_stiffness(filled)
    area = assemble_area_mass(filled)
    lam = m.surface.first_eigenvalue()
    sigma1 = float(steklov.eigenvalues[1])
    padded = beta.padded(filled.n_vertices)
    full = dual_norm_full(K, area, MeasureDiff.from_measures(padded.scaled(sigma1), area.scaled(lam)))
    dot = dual_norm_dot(K, MeasureDiff.from_measures(padded, area, normalize=True))
    lambda1 = float(generalized_eigs(K, area, 1, settings=settings).eigenvalues[1])
    _emit_json({
        'sigma1_bar': steklov.first_nonzero(),
        'lambda1': lam,
        'dual_dist': full,
        'dual_dot_normalized': dot,
        'sandwich_constant': sandwich_constant(lambda1),
        'n_vertices_filled': filled.n_vertices,
    }, out)


@cli.command()
@click.option('--mesh', 'mesh_path', type=click.Path(exists=True, dir_okay=False), required=True)
@click.option('--density', type=click.Choice(['uniform', 'beta']), default='beta', show_default=True)
@click.option('--out', type=click.Path(dir_okay=False), default=None)
@handle_errors
def certify(mesh_path, density, out):
    """Certificat de stabilité sur la sphère après centrage conforme"""
    m = read_mesh(mesh_path)
    settings = SolverSettings()
    record = gap_certificate_sphere(m, _density(m, density, settings), settings)
    _emit_json(record.to_dict(), out)


if __name__ == '__main__':
    cli()
