"""Model families, their serialisation, and frame-level fit/predict pipelines."""
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ._rng import child_seed
from .boost import BoostedModel, BoostParams, fit_boosted
from .encode import ENCODED_MARKET_FEATURES, FrameEncoder
from .frame import MARKET_FEATURES, SOCIO_COLUMNS, STAGE2_FEATURES, TARGET
from .linvote import LinearModel, VotingModel, fit_logistic
from .tree import ForestModel, ForestParams, fit_forest

FAMILIES = ("logistic", "forest", "boosted", "voting")
VOTING_MEMBERS = ("logistic", "forest", "boosted")


def _boost_params(params):
    p = dict(params)
    if "lambda" in p:
        p["lam"] = p.pop("lambda")
    return BoostParams(**p)


def fit_model(family, params, X, y, seed=0, feature_order=None, n_jobs=1):
    """Fit one model of ``family`` with a flat ``params`` dict."""
    params = dict(params or {})
    if family == "logistic":
        return fit_logistic(X, y, seed=seed, feature_order=feature_order, **params)
    if family == "forest":
        return fit_forest(X, y, ForestParams(**params), seed=seed, feature_order=feature_order,
                          n_jobs=n_jobs)
    if family == "boosted":
        return fit_boosted(X, y, _boost_params(params), seed=seed, feature_order=feature_order,
                           n_jobs=n_jobs)
    if family == "voting":
        mode = params.pop("mode", "soft")
        members = [fit_model(m, params.get(m, {}), X, y, child_seed(seed, "voting", m),
                             feature_order, n_jobs) for m in VOTING_MEMBERS]
        return VotingModel(members, mode, list(VOTING_MEMBERS), list(feature_order or []))
    raise ValueError(f"unknown model family {family!r}; expected one of {FAMILIES}")


def family_of(model):
    for fam, cls in (("logistic", LinearModel), ("forest", ForestModel),
                     ("boosted", BoostedModel), ("voting", VotingModel)):
        if isinstance(model, cls):
            return fam
    raise TypeError(f"not a model: {type(model).__name__}")


def model_to_dict(model):
    fam = family_of(model)
    if fam == "voting":
        body = {"mode": model.mode, "feature_order": list(model.feature_order),
                "members": [model_to_dict(m) for m in model.members]}
    else:
        body = model.to_dict()
    return {"family": fam, "model": body}


def model_from_dict(rec):
    fam, body = rec["family"], rec["model"]
    if fam == "logistic":
        return LinearModel.from_dict(body)
    if fam == "forest":
        return ForestModel.from_dict(body)
    if fam == "boosted":
        return BoostedModel.from_dict(body)
    if fam == "voting":
        members = [model_from_dict(m) for m in body["members"]]
        return VotingModel(members, body["mode"], [family_of(m) for m in members],
                           list(body["feature_order"]))
    raise ValueError(f"unknown model family {fam!r}")


@dataclass(frozen=True)
class PipelineSpec:
    """What to fit: model family and params, input columns, and whether to mean-encode.

    With ``encode=True`` a :class:`FrameEncoder` is fitted on the training
    frame and its out-of-fold values feed the model; ``features`` then name
    columns of the encoded frame (``ys1`` and friends included).
    """

    family: str = "boosted"
    params: dict = field(default_factory=dict)
    features: tuple = MARKET_FEATURES
    encode: bool = False
    enc_k: float = 20.0
    enc_folds: int = 5
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "features", tuple(self.features))

    def with_(self, **kw):
        return replace(self, **kw)

    def to_dict(self):
        d = asdict(self)
        d["features"] = list(self.features)
        d.pop("n_jobs")
        return d

    def fit(self, frame, target=TARGET):
        y = np.asarray(frame[target])
        encoder = None
        train = frame
        if self.encode:
            encoder = FrameEncoder.fit(frame, target, self.enc_k, self.enc_folds,
                                       child_seed(self.seed, "encode"))
            train = encoder.transform(frame, training=True)
        X = train.matrix(list(self.features))
        model = fit_model(self.family, self.params, X, y, child_seed(self.seed, "model"),
                          list(self.features), self.n_jobs)
        return FittedPipeline(self, model, encoder)


@dataclass(frozen=True)
class FittedPipeline:
    spec: PipelineSpec
    model: object
    encoder: FrameEncoder | None = None

    @property
    def feature_order(self):
        return list(self.spec.features)

    def design(self, frame):
        """Model-input matrix for new rows (inference-time encodings)."""
        if self.encoder is not None:
            frame = self.encoder.transform(frame, training=False)
        return frame.matrix(self.feature_order)

    def predict_proba(self, frame):
        return self.model.predict_proba(self.design(frame))

    def predict(self, frame):
        return self.model.predict(self.design(frame))

    def importances(self):
        return self.model.importances()

    def to_dict(self):
        return {"spec": self.spec.to_dict(), "model": model_to_dict(self.model),
                "encodings": None if self.encoder is None else self.encoder.to_dict()}

    @classmethod
    def from_dict(cls, rec):
        spec = PipelineSpec(**rec["spec"])
        enc = None if rec["encodings"] is None else FrameEncoder.from_dict(rec["encodings"])
        return cls(spec, model_from_dict(rec["model"]), enc)


STAGE3_BASE_FEATURES = ENCODED_MARKET_FEATURES + SOCIO_COLUMNS
META_FEATURES = ("F1", "F2")
STAGE3_FEATURES = STAGE3_BASE_FEATURES + META_FEATURES


def stage_spec(stage, family="boosted", params=None, seed=0, **kw):
    """Pipeline for the 21-feature (stage 1) or 26-feature (stage 2) model."""
    if stage == 1:
        feats = MARKET_FEATURES
    elif stage == 2:
        feats = STAGE2_FEATURES
    else:
        raise ValueError("stages 1 and 2 are single pipelines; stage 3 is a stack")
    return PipelineSpec(family, dict(params or {}), feats, seed=seed, **kw)
