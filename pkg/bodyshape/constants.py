from pathlib import Path

DIR_MODULE = Path(__file__).resolve().parent

FILE_YAML = DIR_MODULE / 'logging.yml'

DIR_TEMPLATES = DIR_MODULE / 'templates'

SUCCESS_LEVEL = 35

FORMAT_VERSION = 1

# Canonical class order, shared by every file format
CLASS_NAMES = (
    'Apple',
    'Hourglass',
    'InvertedTriangle',
    'Rectangle',
    'Triangle',
)
N_CLASSES = len(CLASS_NAMES)

MEASUREMENT_COLUMNS = ('bust', 'waist', 'hip', 'shoulder', 'stature')

# Measurement bands as integer percentages of stature, half-open [lo, hi)
BANDS = dict(
    shoulder=(15, 25),
    bust=(25, 40),
    waist=(40, 55),
    hip=(55, 70),
)
MIN_MEASURE_ROWS = 32

DEFAULT_CANVAS_WIDTH = 128
DEFAULT_CANVAS_HEIGHT = 256
DEFAULT_NOISE_SIGMA = 0.5

IMBALANCED_CLASS_COUNTS = (50, 315, 166, 315, 95)
MAX_ROTATION = 45.0

NET_INPUT_SIZE = 32

MANIFEST_NAME = 'manifest.csv'
TRUTH_NAME = 'truth.csv'
MEASUREMENTS_NAME = 'measurements.csv'
ERRORS_NAME = 'errors.csv'
PREDICTIONS_NAME = 'predictions.csv'
REPORT_JSON_NAME = 'report.json'
REPORT_TEXT_NAME = 'report.txt'
CHECKPOINT_NAME = 'checkpoint.json'
CURVES_NAME = 'curves.csv'
CURVES_PLOT_NAME = 'curves.png'
STATS_NAME = 'population_stats.json'
CLUSTER_MODEL_NAME = 'cluster_model.json'
ASSIGNMENTS_NAME = 'assignments.csv'
AGREEMENT_NAME = 'agreement.json'
MEMBERSHIPS_NAME = 'memberships.csv'
COMPARISON_NAME = 'comparison.txt'
LDA_MODEL_NAME = 'lda_model.json'

METHODS = ('drop', 'kmeans', 'fcm', 'lda-nm', 'mlp13', 'rescnn', 'incnn',
           'vggnet')
NEURAL_ARCHS = ('mlp13', 'rescnn', 'incnn', 'vggnet')
IMAGE_ARCHS = ('rescnn', 'incnn', 'vggnet')
TRAIN_ARCHS = ('lda-nm',) + NEURAL_ARCHS

VALID_KEYS = (
    'seed',
    'out_dir',
    'canvas_width',
    'canvas_height',
    'noise_sigma',
    'n_per_class',
    'counts',
    'augment_to',
    'method',
    'ratios',
    'z_threshold',
    'k',
    'select_k',
    'criterion',
    'fuzzy',
    'c',
    'fuzzifier',
    'pca',
    'arch',
    'epochs',
    'lr',
    'momentum',
    'batch_size',
    'val_fraction',
    'freeze',
    'preprocess',
    'workers',
    'stamp',
)
