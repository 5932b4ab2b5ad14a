# Core settings

USE_TZ = True


# Estimation

GRID_SIZE = 101

H_MAX = 0.25

BOUNDARY_EPS = 1e-12

SHRINK_ALPHA = 0.5


# Copula families

STUDENT_DF = 4

QUADRATURE_PANELS = 40

QUADRATURE_NODES = 10

DEBYE_NODES = 64

PLACKETT_TAU_NODES = 128


# Bandwidth

TRANSFORM_REFERENCE_NODES = 64

TRANSFORM_REFERENCE_LIMIT = 8.0


# Goodness of fit

DEFAULT_B = 199

ALPHA = 0.05

REPLICATE_RETRIES = 10


# Simulation

DEFAULT_N = 150

DEFAULT_REPS = 200

REPS_PER_BLOCK = 50

SWEEP_H_MIN = 0.005

SWEEP_H_MAX = 0.25

SWEEP_H_COUNT = 20

THREADS = 0


# Logging

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'default': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'default',
            'stream': 'ext://sys.stderr',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
}
