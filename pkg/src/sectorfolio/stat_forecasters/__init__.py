"""Statistical forecasters: stepwise OLS, MARS, ARIMA and VAR."""
from .arima import ArimaError, ArimaModel, arima_fit, arima_forecast
from .linear import LinearModel, RegressionError, ols_fit, ols_predict, variance_inflation
from .mars import BasisTerm, Hinge, MarsError, MarsModel, mars_fit, mars_predict
from .var import VarError, VarModel, var_fit, var_forecast

__all__ = [
    "ArimaError", "ArimaModel", "arima_fit", "arima_forecast",
    "LinearModel", "RegressionError", "ols_fit", "ols_predict", "variance_inflation",
    "BasisTerm", "Hinge", "MarsError", "MarsModel", "mars_fit", "mars_predict",
    "VarError", "VarModel", "var_fit", "var_forecast",
]
