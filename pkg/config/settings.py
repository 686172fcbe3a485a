from pathlib import Path

from decouple import config as decouple_config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# No web surface is served; the key only satisfies Django's startup checks.
SECRET_KEY = decouple_config('SECRET_KEY', default='selection-eval-not-a-secret')

DEBUG = decouple_config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []

INSTALLED_APPS = [
    'rest_framework',
    'evaluation.apps.EvaluationConfig',
    'synthetic.apps.SyntheticConfig',
    'experiments.apps.ExperimentsConfig',
    'deployment.apps.DeploymentSimulationConfig',
    'cli.apps.CliConfig',
]

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [],
        },
    },
]

# Nothing is persisted; reports are written to SELECTION_EVAL_OUTPUT_DIR.
DATABASES = {}

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Simulation defaults, all overridable from the environment or a .env file
SELECTION_EVAL_SEED = decouple_config('SELECTION_EVAL_SEED', default=20220101, cast=int)
SELECTION_EVAL_N = decouple_config('SELECTION_EVAL_N', default=10000, cast=int)
SELECTION_EVAL_SCENARIO_REPS = decouple_config('SELECTION_EVAL_SCENARIO_REPS', default=100, cast=int)
SELECTION_EVAL_SWEEP_REPS = decouple_config('SELECTION_EVAL_SWEEP_REPS', default=1000, cast=int)
SELECTION_EVAL_OUTPUT_DIR = decouple_config('SELECTION_EVAL_OUTPUT_DIR', default='reports')
SELECTION_EVAL_THRESHOLD = decouple_config('SELECTION_EVAL_THRESHOLD', default=0.5, cast=float)
SELECTION_EVAL_CALIBRATION_BINS = decouple_config('SELECTION_EVAL_CALIBRATION_BINS', default=5, cast=int)
SELECTION_EVAL_WORKERS = decouple_config('SELECTION_EVAL_WORKERS', default=1, cast=int)
# share of undefined replicates above which a metric triplet is flagged
SELECTION_EVAL_FLAG_FRACTION = decouple_config('SELECTION_EVAL_FLAG_FRACTION', default=0.10, cast=float)

LOG_LEVEL = decouple_config('LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'simple',
        },
    },
    'loggers': {
        app: {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        }
        for app in ('evaluation', 'synthetic', 'experiments', 'deployment', 'cli')
    },
}
