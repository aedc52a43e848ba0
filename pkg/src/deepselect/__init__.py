"""Deep model selection on autoencoder latent spaces.

Bayesian nonparametric clustering (a truncated Dirichlet-process Gaussian
mixture fit by variational expectations) coupled to a small autoencoder
through a closed-form skew Jensen-Shannon clustering regularizer, with
GMM/KLD and point-estimate baselines and clustering-accuracy evaluation.
"""

from deepselect.config import RunConfig
from deepselect.data import FeatureMatrix, SynthSpec, load_features, save_features, synth_mixture
from deepselect.divergence import (
    DiagGaussian,
    SkewParams,
    alpha_jsd,
    alpha_jsd_first_order,
    asymmetry_table,
    kld_gaussian,
    skew_mixture_params,
)
from deepselect.dpm import DpmHyper, DpmState, estimate_k, fit_dpm, prune_clusters, stick_weights
from deepselect.evaluation import LabeledAssignment, clustering_accuracy, estimated_k_report, summarize
from deepselect.gmm import GmmState, fit_gmm
from deepselect.network import LatentCode, LatentNet, encode, init_net, sample_latent
from deepselect.training import TrainReport, train

__version__ = "0.1.0"

__all__ = [
    "DiagGaussian",
    "SkewParams",
    "kld_gaussian",
    "alpha_jsd",
    "alpha_jsd_first_order",
    "skew_mixture_params",
    "asymmetry_table",
    "GmmState",
    "fit_gmm",
    "DpmHyper",
    "DpmState",
    "fit_dpm",
    "estimate_k",
    "stick_weights",
    "prune_clusters",
    "LatentNet",
    "LatentCode",
    "init_net",
    "encode",
    "sample_latent",
    "RunConfig",
    "TrainReport",
    "train",
    "LabeledAssignment",
    "clustering_accuracy",
    "estimated_k_report",
    "summarize",
    "FeatureMatrix",
    "SynthSpec",
    "synth_mixture",
    "load_features",
    "save_features",
    "__version__",
]
