"""
Files written by the command line: model artifacts (JSON), CSV tables with
their JSON sidecars and the feasible-domain overlay (SVG).
"""

from __future__ import absolute_import
import os
import csv
import json
from collections import namedtuple
from xml.etree import ElementTree
import numpy as np
from .common import InputError
from .constants import CSV_PRECISION, SCHEMA_VERSION
from .lifting import load_model, model_to_dict
from .lincontrol import DareSolution, InvariantSet, Polytope
from .trace_encoder import to_json
from .utils import format_number

ModelArtifact = namedtuple('ModelArtifact', [
    'model',
    'invariant_set',
    'dare',
    'config_hash',
    'seed',
    'diagnostics',
    'terminal_set_error',
])

# Okabe-Ito palette
MODEL_COLORS = (
    '#0072b2',
    '#e69f00',
    '#009e73',
    '#cc79a7',
    '#56b4e9',
    '#d55e00',
    '#f0e442',
    '#000000',
)

CELL_SIZE = 5
LEGEND_ROW = 18
MARGIN = 10


def _ensure_directory(path):
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        os.makedirs(directory)


def write_json(path, document):
    _ensure_directory(path)
    with open(path, 'w') as json_file:
        json_file.write(to_json(document, indent=2, sort_keys=True))
        json_file.write('\n')


def read_json(path):
    try:
        with open(path) as json_file:
            return json.load(json_file)
    except (IOError, OSError) as exception:
        raise InputError('cannot read {}: {}'.format(path, exception))
    except ValueError as exception:
        raise InputError('{} is not valid JSON: {}'.format(path, exception))


def write_model_artifact(path, model, dare, invariant_set, config_hash,
                         seed, diagnostics=None, terminal_set_error=None):
    """
    Serializes a fitted model with its LQR terminal ingredients.
    :param path: target file
    :param model: LiftedModel
    :param dare: DareSolution
    :param invariant_set: InvariantSet or None when its computation failed
    :param config_hash: hash of the generating configuration
    :param seed: sampling seed
    :param diagnostics: dict of fit diagnostics
    :param terminal_set_error: message of the failed invariant set
    """
    document = {
        'schema_version': SCHEMA_VERSION,
        'model': model_to_dict(model),
        'invariant_set': None if invariant_set is None else {
            'polytope': invariant_set.polytope.to_dict(),
            'determinedness': invariant_set.determinedness,
        },
        'dare': {
            'P': dare.P,
            'K': dare.K,
            'iterations': dare.iterations,
            'residual': dare.residual,
        },
        'config_hash': config_hash,
        'seed': seed,
        'diagnostics': diagnostics or {},
        'terminal_set_error': terminal_set_error,
    }
    write_json(path, document)


def load_model_artifact(path):
    """
    Reads a model artifact written by write_model_artifact.
    :param path: artifact file
    :return: ModelArtifact
    """
    document = read_json(path)
    if not isinstance(document, dict) or \
            document.get('schema_version') != SCHEMA_VERSION:
        raise InputError('{} is not a model artifact of schema version {}'
                         .format(path, SCHEMA_VERSION))
    try:
        model = load_model(document['model'])
        set_data = document.get('invariant_set')
        invariant_set = None
        if set_data is not None:
            invariant_set = InvariantSet(
                polytope=Polytope.load_from_dict(set_data['polytope']),
                determinedness=set_data['determinedness'],
            )
        dare_data = document['dare']
        dare = DareSolution(
            P=np.asarray(dare_data['P'], dtype=float),
            K=np.asarray(dare_data['K'], dtype=float),
            iterations=dare_data['iterations'],
            residual=dare_data['residual'],
        )
    except (KeyError, TypeError) as exception:
        raise InputError('{} is missing artifact field {}'.format(
            path, exception
        ))
    return ModelArtifact(
        model=model,
        invariant_set=invariant_set,
        dare=dare,
        config_hash=document.get('config_hash'),
        seed=document.get('seed'),
        diagnostics=document.get('diagnostics') or {},
        terminal_set_error=document.get('terminal_set_error'),
    )


def _cell(value):
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return '1' if value else '0'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_number(value, CSV_PRECISION)
    return str(value)


def write_csv(path, header, rows):
    """
    Header row then one line per row, floats with CSV_PRECISION significant
    digits and empty cells for None.
    """
    _ensure_directory(path)
    with open(path, 'w') as csv_file:
        writer = csv.writer(csv_file, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(value) for value in row])


def write_sidecar(csv_path, config_hash, seed, model_tag=None, extra=None):
    """
    <csv>.json next to a CSV file.
    """
    document = {
        'schema_version': SCHEMA_VERSION,
        'file': os.path.basename(csv_path),
        'config_hash': config_hash,
        'seed': seed,
        'model': model_tag,
    }
    document.update(extra or {})
    write_json(csv_path + '.json', document)


def write_run_csv(path, run):
    """
    Columns t, x1..xn, u1..um, status. The row of the final state carries
    u(T) when the run completed.
    :param path: target file
    :param run: ClosedLoopRun
    """
    n = run.states.shape[1]
    m = run.inputs.shape[1]
    header = ['t'] + ['x{}'.format(index + 1) for index in range(n)] + \
        ['u{}'.format(index + 1) for index in range(m)] + ['status']
    rows = []
    for step, state in enumerate(run.states):
        if step < len(run.inputs):
            u = list(run.inputs[step])
        elif run.terminal_input is not None:
            u = list(run.terminal_input)
        else:
            u = [None] * m
        status = run.statuses[step] if step < len(run.statuses) else ''
        rows.append([step] + list(state) + u + [status])
    write_csv(path, header, rows)


def write_mask_csv(path, scan):
    """
    One row per grid cell: i, j, x1, x2, feasible.
    :param path: target file
    :param scan: FeasibleDomainScan
    """
    first = scan.grid.coordinates(0)
    second = scan.grid.coordinates(1)
    rows = []
    for i, x1 in enumerate(first):
        for j, x2 in enumerate(second):
            rows.append([i, j, x1, x2, bool(scan.mask[i, j])])
    write_csv(path, ['i', 'j', 'x1', 'x2', 'feasible'], rows)


def write_comparison_csv(path, rows):
    """
    :param rows: iterable of ComparisonRow
    """
    header = ['method', 'x0_index', 'dim', 'terminated',
              'lost_feasibility_at', 'lq_cost', 'seed', 'error']
    write_csv(path, header, [
        [row.method, row.x0_index, row.dim, row.terminated,
         row.lost_feasibility_at, row.lq_cost, row.seed, row.error]
        for row in rows
    ])


def write_domain_svg(path, scans):
    """
    Overlay of feasible cells, one translucent color per model, x1 to the
    right and x2 upwards, with a legend listing the cell counts.
    :param path: target file
    :param scans: list of FeasibleDomainScan on the same grid
    """
    if not scans:
        raise InputError('no feasible-domain scans to draw')
    rows, cols = scans[0].mask.shape
    for scan in scans:
        if scan.mask.shape != (rows, cols):
            raise InputError('all scans must share the same grid')
    width = rows * CELL_SIZE + 2 * MARGIN
    height = cols * CELL_SIZE + 2 * MARGIN + LEGEND_ROW * len(scans)

    svg = ElementTree.Element('svg', {
        'xmlns': 'http://www.w3.org/2000/svg',
        'width': str(width),
        'height': str(height),
        'viewBox': '0 0 {} {}'.format(width, height),
    })
    ElementTree.SubElement(svg, 'rect', {
        'x': str(MARGIN),
        'y': str(MARGIN),
        'width': str(rows * CELL_SIZE),
        'height': str(cols * CELL_SIZE),
        'fill': 'none',
        'stroke': '#999999',
    })
    for index, scan in enumerate(scans):
        color = MODEL_COLORS[index % len(MODEL_COLORS)]
        group = ElementTree.SubElement(svg, 'g', {
            'fill': color,
            'fill-opacity': '0.45',
            'id': 'model-{}'.format(index),
        })
        for i, j in zip(*np.nonzero(scan.mask)):
            ElementTree.SubElement(group, 'rect', {
                'x': str(MARGIN + int(i) * CELL_SIZE),
                'y': str(MARGIN + (cols - 1 - int(j)) * CELL_SIZE),
                'width': str(CELL_SIZE),
                'height': str(CELL_SIZE),
            })

        legend_y = 2 * MARGIN + cols * CELL_SIZE + LEGEND_ROW * index
        ElementTree.SubElement(svg, 'rect', {
            'x': str(MARGIN),
            'y': str(legend_y),
            'width': '12',
            'height': '12',
            'fill': color,
        })
        label = ElementTree.SubElement(svg, 'text', {
            'x': str(MARGIN + 18),
            'y': str(legend_y + 11),
            'font-family': 'sans-serif',
            'font-size': '12',
        })
        label.text = '{} ({} cells)'.format(scan.model_tag,
                                            int(np.sum(scan.mask)))

    _ensure_directory(path)
    with open(path, 'wb') as svg_file:
        svg_file.write(ElementTree.tostring(svg, encoding='utf-8'))
