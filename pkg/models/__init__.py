"""
Models for the proxy-control CASF toolkit.
"""
from models.config import BasisSpec, BootstrapConfig, EstimatorConfig
from models.dataset import Dataset, PanelDataset
from models.discrete_model import DiscreteModel, ObservableLaw
from models.gaussian_dgp import GaussianLinearDGP
from models.report import EstimateReport, MonteCarloReport, OracleSuiteReport

__all__ = [
    'BasisSpec', 'BootstrapConfig', 'EstimatorConfig',
    'Dataset', 'PanelDataset',
    'DiscreteModel', 'ObservableLaw',
    'GaussianLinearDGP',
    'EstimateReport', 'MonteCarloReport', 'OracleSuiteReport',
]
