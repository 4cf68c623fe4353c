"""!Experiment matrix: instances x q x paths per tunnel x protected fraction x seed x method

Each combination is a BenchCell whose row holds the exact and surrogate objectives, iteration and cut
counts, wall time, termination reason and feasibility verdict of one solve. Failing cells yield a row
with status "failed"; they never stop the matrix.

Methods:
- "NKCP": the trained convex surrogate
- "NKCP-R": the regression plane 1.299 x + 0.748 y - 0.169
"""
import csv
import io
import json
import os
import threading

from .benchCell import BenchCell, CellKey, MatrixRun
from .instance import InvalidParameterError, enumerateSrlgs
from .instanceIo import DemandGenSpec, InstanceIoError, assignProtection, generateDemands, loadText, \
    parseGraphml, parseSndlib, readSurrogate, saveText
from .log import log
from .nkcpSolver import SolveLimits, solveNkcp
from .pathGenerator import PathGenConfig, buildPathsets
from .surrogate import TrainConfig, buildTrainingGrid, regressionPlane, train

__all__ = ["ExperimentSpec", "readExperimentSpec", "loadNetwork", "makeCells", "runMatrix", "runMatrixDeferred",
    "addGapColumn", "writeResultsCsv", "readResultsCsv", "emitPlots", "workerCount", "Columns"]

NeuralMethod = "NKCP"
RegressionMethod = "NKCP-R"
WorkersEnvVar = "SRLGPROTECT_WORKERS"

Columns = ("instance", "q", "n", "fraction", "seed", "method", "status", "termination", "feasible",
    "exact_objective", "reservation_cost", "routing_cost", "surrogate_objective", "iterations", "cuts",
    "lp_monotone", "wall_ms", "gap", "message")

# relative slack allowed when checking that LP objectives never decrease between rounds
MonotoneTol = 1e-7


class ExperimentSpec(object):
    """!What to run in an experiment matrix
    """
    Methods = (NeuralMethod, RegressionMethod)

    def __init__(self, instancePaths, qList=(1, 2), nList=(3, 6), protectedFractions=(0.4, 0.8),
        timeLimit=600.0, seeds=(0,), tunnelCount=10, demandRange=(1.0, 100.0), expansion=30, metric="hop",
        methods=Methods, tolerance=1e-6, maxIterations=10000, encoding="equality", surrogatePath=None,
        trainEpochs=300):
        """!Construct an ExperimentSpec

        @param[in] instancePaths  SNDLIB (native format) or GraphML files;
            GraphML files (".graphml" or ".xml") get tunnelCount random tunnels,
            SNDLIB files keep their demands
        @param[in] qList  numbers of links per SRLG
        @param[in] nList  numbers of paths per tunnel (tunnels with fewer paths keep what exists)
        @param[in] protectedFractions  fractions of protected tunnels
        @param[in] timeLimit  wall-clock limit of each solve (sec)
        @param[in] seeds  seeds for demand generation and protection assignment
        @param[in] tunnelCount  tunnels generated for topologies without demands
        @param[in] demandRange  (min, max) of generated demands
        @param[in] expansion  candidate paths per kept path
        @param[in] metric  path metric, "hop" or "cost"
        @param[in] methods  subset of ("NKCP", "NKCP-R")
        @param[in] tolerance  relative violation tolerance of the solver
        @param[in] maxIterations  maximum solver rounds
        @param[in] encoding  master encoding, "equality" or "inequality"
        @param[in] surrogatePath  JSON file of a trained surrogate; if None one is trained with seeds[0]
        @param[in] trainEpochs  training epochs if no surrogate file is given

        @throw InvalidParameterError if a list is empty or a value is out of range
        """
        self.instancePaths = tuple(instancePaths)
        self.qList = tuple(int(q) for q in qList)
        self.nList = tuple(int(n) for n in nList)
        self.protectedFractions = tuple(float(f) for f in protectedFractions)
        self.seeds = tuple(int(s) for s in seeds)
        self.methods = tuple(methods)
        for name in ("instancePaths", "qList", "nList", "protectedFractions", "seeds", "methods"):
            if not getattr(self, name):
                raise InvalidParameterError("%s must not be empty" % (name,))
        if timeLimit <= 0:
            raise InvalidParameterError("timeLimit=%r must be > 0" % (timeLimit,))
        for method in self.methods:
            if method not in self.Methods:
                raise InvalidParameterError("unknown method %r; must be one of %s" % (method, self.Methods))
        for fraction in self.protectedFractions:
            if not 0 <= fraction <= 1:
                raise InvalidParameterError("protected fraction %r must be in [0, 1]" % (fraction,))
        self.timeLimit = float(timeLimit)
        self.tunnelCount = int(tunnelCount)
        self.demandRange = tuple(demandRange)
        self.expansion = int(expansion)
        self.metric = metric
        self.tolerance = float(tolerance)
        self.maxIterations = int(maxIterations)
        self.encoding = encoding
        self.surrogatePath = surrogatePath
        self.trainEpochs = int(trainEpochs)

    @property
    def numCells(self):
        return len(self.instancePaths) * len(self.qList) * len(self.nList) * len(self.protectedFractions) \
            * len(self.seeds) * len(self.methods)

    def __repr__(self):
        return "%s(instances=%d, q=%s, n=%s, fractions=%s, seeds=%s, methods=%s)" % \
            (type(self).__name__, len(self.instancePaths), self.qList, self.nList, self.protectedFractions,
            self.seeds, self.methods)


_SpecKeys = dict(
    instances = "instancePaths",
    q = "qList",
    n = "nList",
    protected_fractions = "protectedFractions",
    time_limit = "timeLimit",
    seeds = "seeds",
    tunnel_count = "tunnelCount",
    demand_range = "demandRange",
    expansion = "expansion",
    metric = "metric",
    methods = "methods",
    tolerance = "tolerance",
    max_iterations = "maxIterations",
    encoding = "encoding",
    surrogate = "surrogatePath",
    train_epochs = "trainEpochs",
)


def readExperimentSpec(text, baseDir=None):
    """!Parse an experiment spec from JSON

    Keys: instances (required), q, n, protected_fractions, time_limit, seeds, tunnel_count, demand_range,
    expansion, metric, methods, tolerance, max_iterations, encoding, surrogate, train_epochs.

    @param[in] text  JSON text
    @param[in] baseDir  directory relative instance and surrogate paths are resolved against
    @throw InstanceIoError on malformed JSON or unknown keys
    """
    try:
        data = json.loads(text)
    except ValueError as e:
        raise InstanceIoError("bad experiment spec JSON: %s" % (e,))
    if not isinstance(data, dict) or "instances" not in data:
        raise InstanceIoError("experiment spec must be an object with an \"instances\" list")
    unknown = sorted(set(data) - set(_SpecKeys))
    if unknown:
        raise InstanceIoError("unknown experiment spec keys: %s" % (", ".join(unknown),))

    def resolve(path):
        if baseDir is None or os.path.isabs(path):
            return path
        return os.path.join(baseDir, path)

    kwargs = dict((_SpecKeys[key], value) for key, value in data.items())
    kwargs["instancePaths"] = [resolve(path) for path in kwargs["instancePaths"]]
    if kwargs.get("surrogatePath"):
        kwargs["surrogatePath"] = resolve(kwargs["surrogatePath"])
    try:
        return ExperimentSpec(**kwargs)
    except TypeError as e:
        raise InstanceIoError("bad experiment spec: %s" % (e,))


def loadNetwork(filePath, epsilon=None):
    """!Read an instance file, choosing the parser from the extension (GraphML for .graphml / .xml)
    """
    text = loadText(filePath)
    if os.path.splitext(filePath)[1].lower() in (".graphml", ".xml"):
        return parseGraphml(text, epsilon=epsilon)
    return parseSndlib(text, epsilon=epsilon)


def workerCount(workers=None):
    """!Number of bench workers: the argument if given, else $SRLGPROTECT_WORKERS, else 1

    @throw InvalidParameterError if the count is not a positive integer
    """
    if workers is None:
        workers = os.environ.get(WorkersEnvVar, "1")
    try:
        workers = int(workers)
    except ValueError:
        raise InvalidParameterError("worker count %r is not an integer" % (workers,))
    if workers < 1:
        raise InvalidParameterError("worker count %d must be >= 1" % (workers,))
    return workers


def makeCells(spec):
    """!Return one BenchCell per matrix combination, in spec order
    """
    cells = []
    for instancePath in spec.instancePaths:
        for q in spec.qList:
            for n in spec.nList:
                for fraction in spec.protectedFractions:
                    for seed in spec.seeds:
                        for method in spec.methods:
                            cells.append(BenchCell(CellKey(instancePath, q, n, fraction, seed, method)))
    return cells


class _BenchContext(object):
    """!Shared inputs of the cells of one matrix run; path sets are cached for both methods

    Safe to call from several worker threads.
    """
    def __init__(self, spec, surrogate=None):
        self.spec = spec
        self.surrogate = surrogate
        self._lock = threading.Lock()
        self._surrogateLock = threading.Lock()
        self._networkDict = dict()
        self._pathSetDict = dict()

    def neuralSurrogate(self):
        """!The NKCP surrogate, loaded or trained by the first caller

        Only NKCP cells wait for training; the regression plane and path sets do not.
        """
        with self._surrogateLock:
            if self.surrogate is None:
                if self.spec.surrogatePath:
                    self.surrogate = readSurrogate(loadText(self.spec.surrogatePath))
                else:
                    log.info("training surrogate for %s" % (self.spec,))
                    self.surrogate = train(buildTrainingGrid(),
                        TrainConfig(epochs=self.spec.trainEpochs, seed=self.spec.seeds[0]))
            return self.surrogate

    def network(self, instancePath):
        with self._lock:
            network = self._networkDict.get(instancePath)
        if network is None:
            network = loadNetwork(instancePath)
            with self._lock:
                self._networkDict[instancePath] = network
        return network

    def pathSet(self, key):
        scenario = key[:5]
        with self._lock:
            pathSet = self._pathSetDict.get(scenario)
        if pathSet is not None:
            return pathSet
        spec = self.spec
        instance = self.network(key.instance)
        if instance.tunnels:
            instance = assignProtection(instance, key.fraction, seed=key.seed)
        else:
            instance = generateDemands(instance, DemandGenSpec(spec.tunnelCount, demandRange=spec.demandRange,
                protectedFraction=key.fraction, seed=key.seed))
        instance = instance.withSrlgs(enumerateSrlgs(instance, key.q))
        pathSet = buildPathsets(instance, PathGenConfig(n=key.n, expansion=spec.expansion, metric=spec.metric,
            allowFewer=True))
        with self._lock:
            self._pathSetDict[scenario] = pathSet
        return pathSet

    def solveCell(self, key):
        """!Compute the row of one cell
        """
        spec = self.spec
        pathSet = self.pathSet(key)
        surrogate = self.neuralSurrogate() if key.method == NeuralMethod else regressionPlane()
        limits = SolveLimits(tolerance=spec.tolerance, maxIterations=spec.maxIterations,
            timeLimit=spec.timeLimit, encoding=spec.encoding)
        report = solveNkcp(pathSet, surrogate, limits)
        row = _keyColumns(key)
        row.update(
            status = "ok",
            termination = report.terminationReason,
            feasible = report.feasible,
            exact_objective = report.objective,
            reservation_cost = report.reservationCost,
            routing_cost = report.routingCost,
            surrogate_objective = report.surrogateObjective,
            iterations = report.iterations,
            cuts = report.numCuts,
            lp_monotone = _isMonotone(report.lpObjectives),
            wall_ms = round(report.wallMs, 3),
            message = report.message,
        )
        return row


def _isMonotone(objectives):
    return all(curr >= prev - MonotoneTol * (1 + abs(prev)) for prev, curr in zip(objectives, objectives[1:]))


def _keyColumns(key):
    row = dict((name, "") for name in Columns)
    row.update(instance=key.instance, q=key.q, n=key.n, fraction=key.fraction, seed=key.seed,
        method=key.method)
    return row


def _collectRows(cells):
    rows = []
    for cell in cells:
        if cell.row is not None and not cell.didFail:
            rows.append(cell.row)
        else:
            row = _keyColumns(cell.key)
            row.update(status="failed", feasible=False, message=cell.textMsg)
            rows.append(row)
    return addGapColumn(rows)


def addGapColumn(rows):
    """!Fill the "gap" column of NKCP rows with (obj_NKCP - obj_NKCP-R) / obj_NKCP-R

    The gap is left blank if either objective is missing or the NKCP-R objective is 0.
    @return rows (modified in place)
    """
    regressionDict = dict()
    for row in rows:
        if row["method"] == RegressionMethod:
            regressionDict[_scenario(row)] = row
    for row in rows:
        if row["method"] != NeuralMethod:
            continue
        other = regressionDict.get(_scenario(row))
        if other is None:
            continue
        objNeural = _asFloat(row["exact_objective"])
        objRegression = _asFloat(other["exact_objective"])
        if objNeural is None or objRegression is None or objRegression == 0:
            continue
        row["gap"] = (objNeural - objRegression) / objRegression
    return rows


def _scenario(row):
    return tuple(str(row[name]) for name in ("instance", "q", "n", "fraction", "seed"))


def _asFloat(value):
    if value is None or value == "":
        return None
    return float(value)


def runMatrix(spec, surrogate=None, callFunc=None):
    """!Run every cell of an experiment matrix in this thread

    @param[in] spec  an ExperimentSpec
    @param[in] surrogate  trained surrogate for NKCP; None to load or train one as the spec says
    @param[in] callFunc  called with the MatrixRun on each of its state changes, or None
    @return rows (dicts keyed by Columns) in spec order
    """
    context = _BenchContext(spec, surrogate)
    cells = makeCells(spec)
    MatrixRun(cells, callFunc=callFunc)
    for cell in cells:
        cell.run(context.solveCell)
    return _collectRows(cells)


def runMatrixDeferred(spec, workers=None, surrogate=None, reactor=None, callFunc=None):
    """!Run the cells of an experiment matrix on a thread pool

    @param[in] spec  an ExperimentSpec
    @param[in] workers  pool size; None for workerCount()
    @param[in] surrogate  trained surrogate for NKCP; None to load or train one as the spec says
    @param[in] reactor  twisted reactor; None for the global reactor
    @param[in] callFunc  called with the MatrixRun on each of its state changes, or None
    @return a Deferred firing with the rows in spec order (identical to runMatrix, wall times aside)
    """
    from twisted.internet import defer
    from twisted.internet.threads import deferToThreadPool
    from twisted.python.threadpool import ThreadPool
    if reactor is None:
        from twisted.internet import reactor
    workers = workerCount(workers)

    context = _BenchContext(spec, surrogate)
    cells = makeCells(spec)
    MatrixRun(cells, callFunc=callFunc)
    pool = ThreadPool(minthreads=0, maxthreads=workers, name="srlgProtectBench")
    pool.start()
    log.info("running %d cells on %d workers" % (len(cells), workers))

    deferredList = []
    for cell in cells:
        cell.start()
        d = deferToThreadPool(reactor, pool, context.solveCell, cell.key)
        d.addCallbacks(cell.finish, cell.fail)
        deferredList.append(d)

    def finish(result):
        pool.stop()
        return _collectRows(cells)

    return defer.DeferredList(deferredList, consumeErrors=True).addBoth(finish)


def _formatValue(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return value


def writeResultsCsv(rows):
    """!Return the CSV text of result rows (columns in Columns order)
    """
    stream = io.StringIO()
    writer = csv.DictWriter(stream, fieldnames=Columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(dict((name, _formatValue(row.get(name))) for name in Columns))
    return stream.getvalue()


def readResultsCsv(text):
    """!Parse result CSV text into a list of dicts of strings
    """
    return list(csv.DictReader(io.StringIO(text)))


def _isSolved(row):
    return row["status"] == "ok" and row["termination"] == "converged" and str(row["feasible"]) in ("True", "true")


def _writeTsv(filePath, header, records):
    stream = io.StringIO()
    writer = csv.writer(stream, delimiter="\t", lineterminator="\n")
    writer.writerow(header)
    for record in records:
        writer.writerow([_formatValue(value) for value in record])
    saveText(filePath, stream.getvalue())


def emitPlots(rows, dirPath):
    """!Write plot data for a results table

    - cpu_ranked.tsv: method, rank, wall_ms of the solved cells of each method, fastest first
    - gap_scatter.tsv: one line per scenario with both methods: gap of NKCP to NKCP-R
      ("nan" if unknown) and unsolved = 1 if either method did not solve it
    - solved_counts.tsv: method, n, q, solved, total

    A cell is solved if its solve converged with a feasible exact verdict.

    @param[in] rows  result rows (from runMatrix or readResultsCsv)
    @param[in] dirPath  output directory; created if missing
    @return dict of file name: path written
    @throw InvalidParameterError if rows is empty
    """
    if not rows:
        raise InvalidParameterError("no result rows to plot")
    if not os.path.isdir(dirPath):
        os.makedirs(dirPath)
    methods = []
    for row in rows:
        if row["method"] not in methods:
            methods.append(row["method"])

    ranked = []
    for method in methods:
        times = sorted(float(row["wall_ms"]) for row in rows if row["method"] == method and _isSolved(row))
        ranked += [(method, rank + 1, wallMs) for rank, wallMs in enumerate(times)]

    byScenario = dict()
    order = []
    for row in rows:
        scenario = _scenario(row)
        if scenario not in byScenario:
            order.append(scenario)
        byScenario.setdefault(scenario, dict())[row["method"]] = row
    scatter = []
    for scenario in order:
        methodDict = byScenario[scenario]
        if NeuralMethod not in methodDict or RegressionMethod not in methodDict:
            continue
        gap = _asFloat(methodDict[NeuralMethod]["gap"])
        unsolved = not (_isSolved(methodDict[NeuralMethod]) and _isSolved(methodDict[RegressionMethod]))
        scatter.append(scenario + ("nan" if gap is None else gap, int(unsolved)))

    counts = []
    for method in methods:
        combos = []
        for row in rows:
            combo = (str(row["n"]), str(row["q"]))
            if row["method"] == method and combo not in combos:
                combos.append(combo)
        for n, q in combos:
            selected = [row for row in rows if row["method"] == method and (str(row["n"]), str(row["q"])) == (n, q)]
            counts.append((method, n, q, sum(1 for row in selected if _isSolved(row)), len(selected)))

    outDict = dict()
    for fileName, header, records in (
        ("cpu_ranked.tsv", ("method", "rank", "wall_ms"), ranked),
        ("gap_scatter.tsv", ("instance", "q", "n", "fraction", "seed", "gap", "unsolved"), scatter),
        ("solved_counts.tsv", ("method", "n", "q", "solved", "total"), counts),
    ):
        filePath = os.path.join(dirPath, fileName)
        _writeTsv(filePath, header, records)
        outDict[fileName] = filePath
    return outDict
