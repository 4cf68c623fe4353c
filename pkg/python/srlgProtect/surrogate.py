"""!Convex surrogate of the load transfer function f(x, y) = x / (1 - y)

The surrogate is a one-hidden-layer network

    P(x, y) = sum_i a_i f_i(ax_i x + ay_i y + b_i) + b

whose activations f_i are convex (identity, even powers, exp, relu) and whose output weights a_i are
nonnegative, so P is convex in (x, y). It is trained with mini-batch Adam on a grid of the domain
x + y <= 1, projecting a_i onto a_i >= 0 after every update.

The module also fits the ordinary least squares plane used by the regression baseline.
"""
from collections import namedtuple

import numpy as np
from scipy import optimize

from .instance import InvalidParameterError
from .log import log

__all__ = ["TrainingError", "SingularFitError", "Neuron", "ConvexSurrogate", "TrainingGrid", "TrainConfig",
    "Adam", "AuditReport", "ApproximationProfile", "DefaultKinds", "buildTrainingGrid", "train",
    "convexityAudit", "segmentViolation", "approximationProfile", "fitLinearRegression", "planeSurrogate",
    "regressionPlane", "transferFunction"]

# identity, even powers 2..20, exp, relu
DefaultKinds = ("identity",) + tuple("pow%d" % (2 * i,) for i in range(1, 11)) + ("exp", "relu")

# coefficients of the published regression plane alpha x + beta y + gamma
RegressionPlaneCoeffs = (1.299, 0.748, -0.169)


class TrainingError(Exception):
    """!Training diverged
    """
    def __init__(self, epoch, msg):
        self.epoch = epoch
        Exception.__init__(self, "epoch %s: %s" % (epoch, msg))


class SingularFitError(Exception):
    """!The least squares fit is rank deficient (e.g. collinear samples)
    """
    pass


def transferFunction(x, y):
    """!f(x, y) = x / (1 - y): the share of a tunnel's traffic on a link after a failure
    """
    return np.asarray(x, dtype=float) / (1.0 - np.asarray(y, dtype=float))


def _powerOf(kind):
    if kind == "identity":
        return 1
    if kind.startswith("pow"):
        try:
            power = int(kind[3:])
        except ValueError:
            power = None
        if power is not None and power >= 2 and power % 2 == 0:
            return power
    return None


def _checkKind(kind):
    if kind in ("exp", "relu") or _powerOf(kind) is not None:
        return
    raise InvalidParameterError("unknown or nonconvex activation kind %r" % (kind,))


class Neuron(namedtuple("Neuron", "kind ax ay bi ai")):
    """!One hidden neuron: ai * kind(ax * x + ay * y + bi)
    """
    __slots__ = ()


class ConvexSurrogate(object):
    """!P(x, y) as a sum of convex activations with nonnegative weights plus a bias

    Evaluation and gradients accept scalars or numpy arrays (broadcast together).
    """
    def __init__(self, neurons, bias=0.0, validate=True):
        """!Construct a ConvexSurrogate

        @param[in] neurons  collection of Neuron
        @param[in] bias  output bias b
        @param[in] validate  if True check every kind is convex and every ai >= 0

        @throw InvalidParameterError if validate is True and the surrogate is not convex by construction
        """
        self.neurons = tuple(Neuron(str(n.kind), float(n.ax), float(n.ay), float(n.bi), float(n.ai))
            for n in neurons)
        self.bias = float(bias)
        self.lossHistory = ()
        kinds = [n.kind for n in self.neurons]
        for kind in set(kinds):
            _checkKind(kind)
        if validate:
            for ind, neuron in enumerate(self.neurons):
                if neuron.ai < 0:
                    raise InvalidParameterError("neuron %d has negative output weight %s" % (ind, neuron.ai))
        self._setArrays(
            kinds,
            np.array([n.ax for n in self.neurons], dtype=float),
            np.array([n.ay for n in self.neurons], dtype=float),
            np.array([n.bi for n in self.neurons], dtype=float),
            np.array([n.ai for n in self.neurons], dtype=float),
        )

    def _setArrays(self, kinds, ax, ay, bi, ai):
        self.kinds = tuple(kinds)
        self.ax = ax
        self.ay = ay
        self.bi = bi
        self.ai = ai
        self._layout = _ActivationLayout(self.kinds)

    @property
    def isConvex(self):
        """!True if every output weight is nonnegative (the activations are convex by construction)
        """
        return bool(np.all(self.ai >= 0))

    def preActivations(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.multiply.outer(x, self.ax) + np.multiply.outer(y, self.ay) + self.bi

    def evaluate(self, x, y):
        """!Return P(x, y)
        """
        z = self.preActivations(x, y)
        return self._layout.activate(z) @ self.ai + self.bias

    __call__ = evaluate

    def gradient(self, x, y):
        """!Return (dP/dx, dP/dy); the relu derivative is 0 at its kink
        """
        z = self.preActivations(x, y)
        weighted = self._layout.derivative(z) * self.ai
        return weighted @ self.ax, weighted @ self.ay

    def toDict(self):
        return dict(
            neurons = [dict(kind=n.kind, ax=n.ax, ay=n.ay, bi=n.bi, ai=n.ai) for n in self.neurons],
            bias = self.bias,
        )

    @classmethod
    def fromDict(cls, data):
        neurons = [Neuron(item["kind"], item["ax"], item["ay"], item["bi"], item["ai"]) for item in data["neurons"]]
        return cls(neurons, data["bias"])

    def __eq__(self, other):
        if not isinstance(other, ConvexSurrogate):
            return NotImplemented
        return self.neurons == other.neurons and self.bias == other.bias

    def __ne__(self, other):
        return not (self == other)

    def __repr__(self):
        return "%s(neurons=%d, bias=%s)" % (type(self).__name__, len(self.neurons), self.bias)


class _ActivationLayout(object):
    """!Column groups of the hidden layer by activation type, for vectorized evaluation
    """
    def __init__(self, kinds):
        powers = [_powerOf(kind) for kind in kinds]
        self.powInds = np.array([i for i, p in enumerate(powers) if p is not None], dtype=np.int64)
        self.powers = np.array([p for p in powers if p is not None], dtype=float)
        self.expInds = np.array([i for i, kind in enumerate(kinds) if kind == "exp"], dtype=np.int64)
        self.reluInds = np.array([i for i, kind in enumerate(kinds) if kind == "relu"], dtype=np.int64)

    def activate(self, z):
        out = np.empty_like(z)
        if len(self.powInds):
            out[..., self.powInds] = z[..., self.powInds] ** self.powers
        if len(self.expInds):
            out[..., self.expInds] = np.exp(z[..., self.expInds])
        if len(self.reluInds):
            out[..., self.reluInds] = np.maximum(z[..., self.reluInds], 0.0)
        return out

    def derivative(self, z):
        out = np.empty_like(z)
        if len(self.powInds):
            out[..., self.powInds] = self.powers * z[..., self.powInds] ** (self.powers - 1)
        if len(self.expInds):
            out[..., self.expInds] = np.exp(z[..., self.expInds])
        if len(self.reluInds):
            out[..., self.reluInds] = (z[..., self.reluInds] > 0).astype(float)
        return out


class TrainingGrid(object):
    """!Labeled samples (x, y, label) for training and fitting
    """
    def __init__(self, x, y, labels=None):
        """!Construct a TrainingGrid

        @param[in] x  sample x values (1-d array)
        @param[in] y  sample y values (1-d array)
        @param[in] labels  sample labels; None to label by x / (1 - y)
        """
        self.x = np.asarray(x, dtype=float).ravel()
        self.y = np.asarray(y, dtype=float).ravel()
        if self.x.shape != self.y.shape:
            raise InvalidParameterError("x and y have different lengths")
        self.labels = transferFunction(self.x, self.y) if labels is None else np.asarray(labels, dtype=float).ravel()
        if self.labels.shape != self.x.shape:
            raise InvalidParameterError("labels and samples have different lengths")

    def __len__(self):
        return len(self.x)

    def __repr__(self):
        return "%s(samples=%d)" % (type(self).__name__, len(self))


def buildTrainingGrid(numX=100, numY=100, xRange=(0.05, 1.0), yRange=(0.0, 0.99)):
    """!Return the training grid: evenly spaced x and y values, keeping pairs with x + y <= 1

    Samples are ordered by x then y, so the first one is (0.05, 0.0).
    """
    xs = np.linspace(xRange[0], xRange[1], numX)
    ys = np.linspace(yRange[0], yRange[1], numY)
    xMesh, yMesh = np.meshgrid(xs, ys, indexing="ij")
    keep = xMesh + yMesh <= 1.0 + 1e-12
    return TrainingGrid(xMesh[keep], yMesh[keep])


class TrainConfig(object):
    """!Surrogate training settings
    """
    def __init__(self, epochs=300, learningRate=1e-2, seed=0, lambdaUnder=0.0, batchSize=32,
        neuronsPerKind=5, kinds=DefaultKinds, finalLrFraction=0.01, polish=True,
        beta1=0.9, beta2=0.999, adamEpsilon=1e-8):
        """!Construct a TrainConfig

        @param[in] epochs  passes over the grid
        @param[in] learningRate  initial Adam learning rate
        @param[in] seed  random seed for initialization and batch shuffling
        @param[in] lambdaUnder  weight of an extra squared penalty on points where P < f
            (0 for plain mean squared error)
        @param[in] batchSize  mini-batch size
        @param[in] neuronsPerKind  hidden neurons per activation kind
        @param[in] kinds  activation kinds
        @param[in] finalLrFraction  the learning rate decays geometrically to learningRate * finalLrFraction
            at the last epoch; 1 for a constant rate
        @param[in] polish  if True (and lambdaUnder == 0) refit the output layer by nonnegative least squares
            after the last epoch
        @param[in] beta1  Adam first moment decay
        @param[in] beta2  Adam second moment decay
        @param[in] adamEpsilon  Adam denominator offset

        @throw InvalidParameterError if a parameter is out of range
        """
        if epochs < 1:
            raise InvalidParameterError("epochs=%r must be >= 1" % (epochs,))
        if lambdaUnder < 0:
            raise InvalidParameterError("lambdaUnder=%r must be >= 0" % (lambdaUnder,))
        if learningRate <= 0:
            raise InvalidParameterError("learningRate=%r must be > 0" % (learningRate,))
        if batchSize < 1 or neuronsPerKind < 1:
            raise InvalidParameterError("batchSize and neuronsPerKind must be >= 1")
        if not 0 < finalLrFraction <= 1:
            raise InvalidParameterError("finalLrFraction=%r must be in (0, 1]" % (finalLrFraction,))
        for kind in kinds:
            _checkKind(kind)
        self.epochs = int(epochs)
        self.learningRate = float(learningRate)
        self.seed = int(seed)
        self.lambdaUnder = float(lambdaUnder)
        self.batchSize = int(batchSize)
        self.neuronsPerKind = int(neuronsPerKind)
        self.kinds = tuple(kinds)
        self.finalLrFraction = float(finalLrFraction)
        self.polish = bool(polish)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.adamEpsilon = float(adamEpsilon)

    def learningRateAt(self, epoch):
        """!Learning rate used during epoch (1-based)
        """
        if self.epochs == 1:
            return self.learningRate
        return self.learningRate * self.finalLrFraction ** (float(epoch - 1) / (self.epochs - 1))

    def __repr__(self):
        return "%s(epochs=%s, learningRate=%s, seed=%s, lambdaUnder=%s)" % \
            (type(self).__name__, self.epochs, self.learningRate, self.seed, self.lambdaUnder)


class Adam(object):
    """!Adam optimizer over a dict of numpy arrays, updated in place
    """
    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m = {}
        self.v = {}
        self.t = 0

    def step(self, params, grads):
        """!Apply one update

        @param[in,out] params  dict of name: array
        @param[in] grads  dict of name: gradient array (same shapes as params)
        """
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        stepSize = self.lr / bc1
        for name, param in params.items():
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(param)
                self.v[name] = np.zeros_like(param)
            self.m[name] *= self.beta1
            self.m[name] += (1.0 - self.beta1) * g
            self.v[name] *= self.beta2
            self.v[name] += (1.0 - self.beta2) * (g * g)
            denom = np.sqrt(self.v[name] / bc2) + self.epsilon
            param -= stepSize * self.m[name] / denom


def _initialParams(kinds, rng):
    """!Initial hidden and output parameters, scaled so every activation starts out of order 1 on [0, 1]^2
    """
    num = len(kinds)
    ax = rng.uniform(-1.0, 1.0, num)
    ay = rng.uniform(-1.0, 1.0, num)
    bi = rng.uniform(-0.5, 0.5, num)
    for i, kind in enumerate(kinds):
        power = _powerOf(kind)
        if power is not None and power > 1:
            # keep |z| <= 1
            ax[i] *= 0.4
            ay[i] *= 0.4
            bi[i] *= 0.4
        elif kind == "exp":
            bi[i] = rng.uniform(-1.0, 0.0)
    ai = rng.uniform(0.0, 0.1, num)
    return dict(ax=ax, ay=ay, bi=bi, ai=ai, bias=np.zeros(1))


def _loss(pred, labels, lambdaUnder):
    resid = pred - labels
    loss = np.mean(resid * resid)
    if lambdaUnder:
        under = np.minimum(resid, 0.0)
        loss += lambdaUnder * np.mean(under * under)
    return float(loss)


def train(grid, config=None):
    """!Train a ConvexSurrogate on a grid

    The hidden layer holds config.neuronsPerKind neurons of each of config.kinds.
    Mini-batch Adam minimizes the mean squared error (plus the optional under-approximation penalty);
    output weights are projected onto [0, inf) after every update.

    The returned surrogate's lossHistory holds the full-grid loss before training followed by
    the loss after each epoch.

    @throw InvalidParameterError if the grid is empty
    @throw TrainingError if the loss becomes non-finite
    """
    config = config or TrainConfig()
    if len(grid) == 0:
        raise InvalidParameterError("empty training grid")
    rng = np.random.default_rng(config.seed)
    kinds = [kind for kind in config.kinds for _ in range(config.neuronsPerKind)]
    params = _initialParams(kinds, rng)
    model = ConvexSurrogate([], 0.0)
    model._setArrays(kinds, params["ax"], params["ay"], params["bi"], params["ai"])
    layout = model._layout
    inputs = np.column_stack((grid.x, grid.y))
    optimizer = Adam(lr=config.learningRate, beta1=config.beta1, beta2=config.beta2, epsilon=config.adamEpsilon)

    def fullLoss():
        return _loss(model.evaluate(grid.x, grid.y) + params["bias"][0], grid.labels, config.lambdaUnder)

    lossHistory = [fullLoss()]
    log.info("training surrogate: %d neurons, %d samples, %s; initial loss %.6g" %
        (len(kinds), len(grid), config, lossHistory[0]))
    numSamples = len(grid)
    for epoch in range(1, config.epochs + 1):
        optimizer.lr = config.learningRateAt(epoch)
        order = rng.permutation(numSamples)
        for start in range(0, numSamples, config.batchSize):
            batch = order[start:start + config.batchSize]
            xb = inputs[batch, 0]
            yb = inputs[batch, 1]
            z = np.outer(xb, params["ax"]) + np.outer(yb, params["ay"]) + params["bi"]
            act = layout.activate(z)
            pred = act @ params["ai"] + params["bias"][0]
            resid = pred - grid.labels[batch]
            dPred = resid
            if config.lambdaUnder:
                dPred = dPred + config.lambdaUnder * np.minimum(resid, 0.0)
            dPred = dPred * (2.0 / len(batch))
            dz = np.outer(dPred, params["ai"]) * layout.derivative(z)
            grads = dict(
                ax = xb @ dz,
                ay = yb @ dz,
                bi = dz.sum(axis=0),
                ai = act.T @ dPred,
                bias = np.array([dPred.sum()]),
            )
            optimizer.step(params, grads)
            np.maximum(params["ai"], 0.0, out=params["ai"])
        loss = fullLoss()
        if not np.isfinite(loss):
            raise TrainingError(epoch, "loss is %s" % (loss,))
        lossHistory.append(loss)
        log.debug("epoch %d: lr=%.3g loss=%.6g" % (epoch, optimizer.lr, loss))

    if config.polish and not config.lambdaUnder:
        _polishOutputLayer(params, layout, grid)
        log.info("polished output layer: loss %.6g" % (_loss(
            layout.activate(model.preActivations(grid.x, grid.y)) @ params["ai"] + params["bias"][0],
            grid.labels, 0.0),))

    neurons = [Neuron(kind, params["ax"][i], params["ay"][i], params["bi"][i], params["ai"][i])
        for i, kind in enumerate(kinds)]
    surrogate = ConvexSurrogate(neurons, params["bias"][0])
    surrogate.lossHistory = tuple(lossHistory)
    log.info("trained surrogate: final epoch loss %.6g" % (lossHistory[-1],))
    return surrogate


def _polishOutputLayer(params, layout, grid):
    """!Refit output weights (>= 0) and bias (free) by nonnegative least squares, keeping the hidden layer
    """
    z = np.multiply.outer(grid.x, params["ax"]) + np.multiply.outer(grid.y, params["ay"]) + params["bi"]
    act = layout.activate(z)
    ones = np.ones((len(grid), 1))
    matrix = np.hstack((act, ones, -ones))
    coeffs, _ = optimize.nnls(matrix, grid.labels, maxiter=50 * matrix.shape[1])
    numNeurons = act.shape[1]
    newAi = coeffs[:numNeurons]
    newBias = coeffs[numNeurons] - coeffs[numNeurons + 1]
    oldLoss = _loss(act @ params["ai"] + params["bias"][0], grid.labels, 0.0)
    newLoss = _loss(act @ newAi + newBias, grid.labels, 0.0)
    if np.isfinite(newLoss) and newLoss < oldLoss:
        params["ai"][:] = newAi
        params["bias"][0] = newBias


ApproximationProfile = namedtuple("ApproximationProfile",
    "maxRelError meanRelError worstRelPoint underFraction worstUnder worstUnderPoint")


def approximationProfile(surrogate, grid):
    """!Compare a surrogate against the grid labels

    @return an ApproximationProfile:
    - maxRelError, meanRelError: |P - f| / |f| over the grid
    - worstRelPoint: (x, y) of the largest relative error
    - underFraction: fraction of samples where P < f
    - worstUnder: largest f - P (0 if P >= f everywhere)
    - worstUnderPoint: (x, y) where worstUnder occurs
    """
    pred = surrogate.evaluate(grid.x, grid.y)
    relError = np.abs(pred - grid.labels) / np.maximum(np.abs(grid.labels), 1e-12)
    under = grid.labels - pred
    relInd = int(np.argmax(relError))
    underInd = int(np.argmax(under))
    return ApproximationProfile(
        maxRelError = float(relError[relInd]),
        meanRelError = float(relError.mean()),
        worstRelPoint = (float(grid.x[relInd]), float(grid.y[relInd])),
        underFraction = float(np.mean(under > 0)),
        worstUnder = float(max(under[underInd], 0.0)),
        worstUnderPoint = (float(grid.x[underInd]), float(grid.y[underInd])),
    )


AuditReport = namedtuple("AuditReport", "trials violations worstViolation profile")


def segmentViolation(surrogate, u, v, lam):
    """!Return P(lam u + (1 - lam) v) - (lam P(u) + (1 - lam) P(v)); positive means nonconvex along the segment
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    mid = lam * u + (1.0 - lam) * v
    return float(surrogate.evaluate(mid[0], mid[1])
        - (lam * surrogate.evaluate(u[0], u[1]) + (1.0 - lam) * surrogate.evaluate(v[0], v[1])))


def _sampleDomain(rng, num):
    """!num points uniform on {x, y >= 0, x + y <= 1}
    """
    pts = rng.uniform(0.0, 1.0, (num, 2))
    flip = pts.sum(axis=1) > 1.0
    pts[flip] = 1.0 - pts[flip][:, ::-1]
    return pts


def convexityAudit(surrogate, trials=10000, seed=0, grid=None, tolerance=1e-9):
    """!Test convexity along random segments of the domain x, y >= 0, x + y <= 1

    A trial (u, v, lam) is a violation if P(lam u + (1 - lam) v) > lam P(u) + (1 - lam) P(v) + tolerance.

    @param[in] surrogate  the surrogate to audit
    @param[in] trials  number of random segments
    @param[in] seed  random seed
    @param[in] grid  if not None, also profile the approximation error over this grid
    @param[in] tolerance  absolute slack
    @return an AuditReport
    """
    rng = np.random.default_rng(seed)
    u = _sampleDomain(rng, trials)
    v = _sampleDomain(rng, trials)
    lam = rng.uniform(0.0, 1.0, trials)
    mid = lam[:, None] * u + (1.0 - lam[:, None]) * v
    gap = surrogate.evaluate(mid[:, 0], mid[:, 1]) \
        - (lam * surrogate.evaluate(u[:, 0], u[:, 1]) + (1.0 - lam) * surrogate.evaluate(v[:, 0], v[:, 1]))
    violations = int(np.sum(gap > tolerance))
    if violations:
        log.warn("convexity audit: %d of %d segments violate convexity" % (violations, trials))
    profile = approximationProfile(surrogate, grid) if grid is not None else None
    return AuditReport(trials, violations, float(gap.max()) if trials else 0.0, profile)


def fitLinearRegression(grid):
    """!Fit the plane alpha x + beta y + gamma to a grid by ordinary least squares

    @return (alpha, beta, gamma)
    @throw SingularFitError if the samples do not determine a plane
    """
    if len(grid) == 0:
        raise InvalidParameterError("empty grid")
    matrix = np.column_stack((grid.x, grid.y, np.ones(len(grid))))
    coeffs, _, rank, _ = np.linalg.lstsq(matrix, grid.labels, rcond=None)
    if rank < 3:
        raise SingularFitError("samples span rank %d; a plane needs 3" % (rank,))
    return tuple(float(c) for c in coeffs)


def planeSurrogate(alpha, beta, gamma):
    """!Return the plane alpha x + beta y + gamma as a ConvexSurrogate of two identity neurons
    """
    neurons = [
        Neuron("identity", np.sign(alpha) or 1.0, 0.0, 0.0, abs(alpha)),
        Neuron("identity", 0.0, np.sign(beta) or 1.0, 0.0, abs(beta)),
    ]
    return ConvexSurrogate(neurons, gamma)


def regressionPlane():
    """!The published regression plane 1.299 x + 0.748 y - 0.169 as a surrogate
    """
    return planeSurrogate(*RegressionPlaneCoeffs)
