"""Constants and defaults for gibbscal."""

from types import SimpleNamespace

LOSS_KIND = SimpleNamespace(
    Quantile="quantile",
    Mcid="mcid",
    CheckRegression="check-regression",
    Hinge="hinge",
    SquaredError="squared-error",
)
LOSS_KINDS = tuple(vars(LOSS_KIND).values())
TAU_LOSS_KINDS = (LOSS_KIND.Quantile, LOSS_KIND.CheckRegression)
LABEL_LOSS_KINDS = (LOSS_KIND.Hinge, LOSS_KIND.Mcid)

BASIS_KIND = SimpleNamespace(
    Affine="affine", Polynomial="polynomial", Identity="identity"
)

PRIOR_KIND = SimpleNamespace(Flat="flat", Gaussian="gaussian")

REGION_KIND = SimpleNamespace(
    Interval="interval",
    Ellipse="ellipse",
    DensityLevel="density-level",
    Band="band",
)
REGION_KINDS = tuple(vars(REGION_KIND).values())

DGP_KIND = SimpleNamespace(
    GammaQuantile="gamma-quantile",
    Mcid="mcid",
    QuantileRegression="quantile-regression",
    HingeClassification="hinge-classification",
    NonlinearRegression="nonlinear-regression",
)
DGP_KINDS = tuple(vars(DGP_KIND).values())

COMMANDS = ("fit", "sample", "calibrate", "simulate", "curve", "diagnose")

EXIT_CODE = SimpleNamespace(Ok=0, Usage=2, Data=3, Numerical=4)

# optimizer (erm_fit)
DEFAULT_N_STARTS = 5
DEFAULT_OPT_MAX_ITER = 4000
DEFAULT_OPT_XATOL = 1e-8
DEFAULT_OPT_FATOL = 1e-10
DEFAULT_START_JITTER = 1.0

# sampler (sample_gibbs)
DEFAULT_N_DRAWS = 2000
DEFAULT_BURN_IN = 1000
DEFAULT_THIN = 1
DEFAULT_ADAPT_WINDOW = 100
TARGET_ACCEPT_1D = 0.44
TARGET_ACCEPT_ND = 0.234
ADAPT_GAIN_EXPONENT = 0.6
PROPOSAL_JITTER = 1e-10

# calibration (gpc_calibrate)
DEFAULT_ALPHA = 0.05
DEFAULT_B = 300
DEFAULT_ETA0 = 1.0
DEFAULT_KAPPA0 = 1.0
DEFAULT_GAMMA_EXP = 0.75
DEFAULT_MAX_ITER = 15
DEFAULT_TOL = 0.01
DEFAULT_ETA_BOUNDS = (1e-4, 1e4)
DEFAULT_BAND_POINTS = 50

# asymptotics
EIGEN_FLOOR = 1e-12
PLAIN_STEP_EXPONENT = -0.25  # step n^(-1/4) for unsmoothed differences
BANDWIDTH_EXPONENT = -0.2  # h = h0 * n^(-1/5)
SMOOTH_STEP_FRACTION = 0.05

# regions
MIN_INTERVAL_DRAWS = 10

# data-generating processes
GAMMA_SHAPE = 5.0
GAMMA_SCALE = 1.0
GAMMA_TAU = 0.7
QR_THETA = (2.0, 1.0)
QR_CHISQ_DF = 4
QR_SHIFT = 2.0
QR_NOISE_SD = 2.0
HINGE_THETA = (1.0, -1.0)
HINGE_T_DF = 3
HINGE_X_MEAN = 1.0
HINGE_X_SD = 1.0
NLR_COEFS = (-1.2, 15.2, -34.0, 20.0)  # 20x^3 - 34x^2 + 15.2x - 1.2
NLR_NOISE_SD = 0.2
NLR_DEGREE = 3
NLR_PRIOR_SD = 10.0
MCID_PRIOR_SD = 2.0

# output
SEED_DOMAIN = "gibbscal"
WORKERS_ENV = "GIBBSCAL_WORKERS"
SLOW_TESTS_ENV = "GIBBSCAL_SLOW_TESTS"

ATTRS_DRAWS = {
    "summary_keys": ["n_draws", "mean", "sd"],
    "detail_keys": ["accept_rate", "quantiles", "seed"],
}
ATTRS_STUDY = {
    "summary_keys": ["reps", "coverage", "mean_eta_hat", "sd_eta_hat"],
    "detail_keys": ["failed", "mean_region_size"],
}
