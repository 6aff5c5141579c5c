"""Machine-learning forecasters: KNN, CART, random forest, boosting, logit."""
from .ensemble import (
    ForestModel, GbmModel, forest_fit, forest_predict, gbm_decision, gbm_fit,
    gbm_predict, gbm_predict_proba,
)
from .knn import KnnModel, knn_fit, knn_predict
from .logit import LogitModel, logit_fit, logit_predict, logit_predict_proba
from .tree import CartTree, cart_fit, cart_predict

__all__ = [
    "CartTree", "cart_fit", "cart_predict",
    "ForestModel", "forest_fit", "forest_predict",
    "GbmModel", "gbm_fit", "gbm_predict", "gbm_predict_proba", "gbm_decision",
    "KnnModel", "knn_fit", "knn_predict",
    "LogitModel", "logit_fit", "logit_predict", "logit_predict_proba",
]
