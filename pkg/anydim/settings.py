"""
Django settings for the anydim project.

anydim has no web surface: Django hosts the management commands, the
serializer-based validation of input files and the logging configuration.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

from pathlib import Path
import os

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get('ANYDIM_SECRET_KEY', 'anydim-insecure-local-commands-only')

DEBUG = os.environ.get('ANYDIM_DEBUG', '') == '1'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',
    'rest_framework',
    'freesets',
]

# No models are stored; commands read and write plain text files.
DATABASES = {}


# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Numerical settings for the freesets app.
# SOLVER and the rank, residual and membership tolerances can be overridden
# per run through the config file of a command.
FREESETS = {
    # Backend handed to cvxpy for every conic program.
    'SOLVER': os.environ.get('ANYDIM_SOLVER', 'CLARABEL'),
    # Singular values below RANK_TOLERANCE * sigma_max count as zero.
    'RANK_TOLERANCE': 1e-8,
    # Residual bound for equivariance, morphism and extension checks.
    'RESIDUAL_TOLERANCE': 1e-8,
    'LSQR_TOLERANCE': 1e-10,
    # Constraint matrices with more columns than this use the randomized nullspace.
    'DENSE_NULLSPACE_COLUMNS': 200_000,
    'GROUP_ENUMERATION_LIMIT': 5000,
    'MEMBERSHIP_TOLERANCE': 1e-7,
    'LAMBDA_MIN': 1e-3,
    'RESTARTS': 100,
    'MAX_ALTERNATIONS': 50,
    'STALL_TOLERANCE': 1e-6,
    'STALL_ROUNDS': 5,
    'EIGEN_GAP': 1e-6,
    'BLOCK_RESAMPLES': 10,
}


# Logging

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
            'formatter': 'simple',
        },
    },
    'loggers': {
        'freesets': {
            'handlers': ['console'],
            'level': os.environ.get('ANYDIM_LOG_LEVEL', 'WARNING'),
        },
    },
}
