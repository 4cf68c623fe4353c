"""!Command-line interface: srlgProtect <subcommand> ...

Subcommands:
- parse: read an SNDLIB or GraphML file and write instance JSON
- gen-demands: replace the tunnels of an instance by random ones
- paths: generate n SRLG-disjoint candidate paths per tunnel
- train-approx: train the convex surrogate of x / (1 - y)
- solve: compute split ratios and reservations (NKCP, or NKCP-R with --regression)
- evaluate: exact reservations and costs of given split ratios
- bench: run an experiment matrix

Exit status is 0 on success, 1 on a reported error and 2 on a usage error.
"""
import argparse
import os
import sys

from .bench import emitPlots, readExperimentSpec, runMatrix, runMatrixDeferred, workerCount, \
    writeResultsCsv
from .instance import InstanceError, InvalidParameterError, enumerateSrlgs, validate
from .instanceIo import DemandGenSpec, GraphmlDefaults, InstanceIoError, generateDemands, loadText, \
    parseGraphml, parseSndlib, readInstance, readPathSets, readSplits, readSurrogate, saveText, writeInstance, \
    writePathSets, writeSolution, writeSurrogate
from .log import log, startFileLogging, stopLogging
from .lpCore import LpError, ScipyLpSolver, SimplexSolver
from .nkcpSolver import MasterBuildError, SolveLimits, solveNkcp
from .pathGenerator import InsufficientPathsError, PathGenConfig, buildPathsets
from .protection import TotalFailureError, checkCapacity, reservationTable, totalCost, validateSplits, \
    writeReservationCsv
from .surrogate import SingularFitError, TrainConfig, TrainingError, buildTrainingGrid, \
    convexityAudit, regressionPlane, train
from .version import __version__

__all__ = ["main", "makeParser"]

# errors reported as "Error: <message>" with exit status 1
ReportedErrors = (InstanceIoError, InstanceError, InvalidParameterError, InsufficientPathsError, TrainingError,
    SingularFitError, LpError, MasterBuildError, TotalFailureError)


def _write(outPath, text):
    if outPath in (None, "-"):
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        saveText(outPath, text)


def _loadInstance(args):
    """!Read --instance JSON and replace its SRLGs by all q-link sets if --q is given
    """
    instance = readInstance(loadText(args.instance))
    if getattr(args, "q", None):
        instance = instance.withSrlgs(enumerateSrlgs(instance, args.q))
    return instance


def doParse(args):
    if args.format == "graphml" or (args.format is None and
        os.path.splitext(args.file)[1].lower() in (".graphml", ".xml")):
        instance = parseGraphml(loadText(args.file),
            defaults=GraphmlDefaults(capacity=args.default_capacity, cost=args.default_cost), epsilon=args.epsilon)
    else:
        instance = parseSndlib(loadText(args.file), epsilon=args.epsilon)
    violations = validate(instance)
    for violation in violations:
        sys.stderr.write("Warning: %s\n" % (violation,))
    sys.stderr.write("%s\n" % (instance,))
    _write(args.out, writeInstance(instance))
    return 0


def doGenDemands(args):
    instance = readInstance(loadText(args.instance))
    spec = DemandGenSpec(args.tunnels, demandRange=(args.demand_min, args.demand_max),
        protectedFraction=args.protected_fraction, seed=args.seed)
    _write(args.out, writeInstance(generateDemands(instance, spec)))
    return 0


def doPaths(args):
    instance = _loadInstance(args)
    config = PathGenConfig(n=args.paths_per_tunnel, expansion=args.expansion, metric=args.metric,
        allowFewer=args.allow_fewer)
    _write(args.out, writePathSets(buildPathsets(instance, config)))
    return 0


def doTrainApprox(args):
    config = TrainConfig(epochs=args.epochs, learningRate=args.learning_rate, seed=args.seed,
        lambdaUnder=args.lambda_under, neuronsPerKind=args.neurons_per_kind)
    grid = buildTrainingGrid()
    surrogate = train(grid, config)
    audit = convexityAudit(surrogate, trials=args.audit_trials, seed=args.seed, grid=grid)
    profile = audit.profile
    sys.stderr.write("final loss %.6g; max rel error %.4f at %s; mean rel error %.4f; "
        "worst under-approximation %.4f; convexity violations %d of %d\n" % (surrogate.lossHistory[-1],
        profile.maxRelError, profile.worstRelPoint, profile.meanRelError, profile.worstUnder,
        audit.violations, audit.trials))
    _write(args.out, writeSurrogate(surrogate))
    return 0


def doSolve(args):
    instance = _loadInstance(args)
    pathSet = readPathSets(loadText(args.paths), instance)
    if args.regression:
        surrogate = regressionPlane()
    elif args.surrogate:
        surrogate = readSurrogate(loadText(args.surrogate))
    else:
        raise InvalidParameterError("give --surrogate FILE or --regression")
    solver = ScipyLpSolver() if args.lp_solver == "highs" else SimplexSolver()
    limits = SolveLimits(tolerance=args.tolerance, maxIterations=args.max_iterations, timeLimit=args.time_limit,
        encoding=args.encoding, deepestCutOnly=args.deepest_cut, warmStart=not args.no_warm_start, solver=solver)
    fixedSplits = readSplits(loadText(args.splits)) if args.splits else None
    report = solveNkcp(pathSet, surrogate, limits, fixedSplits=fixedSplits)
    sys.stderr.write("%s\n" % (report,))
    _write(args.out, writeSolution(report))
    return 0


def doEvaluate(args):
    instance = _loadInstance(args)
    pathSet = readPathSets(loadText(args.paths), instance)
    splits = readSplits(loadText(args.splits))
    validateSplits(pathSet, splits)
    rows = reservationTable(pathSet, splits)
    cost = totalCost(pathSet, splits)
    violations = checkCapacity(pathSet, splits)
    sys.stderr.write("reservation cost %.6f; routing cost %.6f; total %.6f; %s\n" % (cost.reservationCost,
        cost.routingCost, cost.total, "feasible" if not violations else "%d capacity violations" % (len(violations),)))
    for violation in violations:
        sys.stderr.write("Warning: link %s carries %.6f > %.6f after failure of %s\n" %
            (violation.linkId, violation.load, violation.capacity, violation.srlgId))
    _write(args.out, writeReservationCsv(rows))
    return 0


def doBench(args):
    spec = readExperimentSpec(loadText(args.spec), baseDir=os.path.dirname(os.path.abspath(args.spec)))
    workers = workerCount(args.workers)
    if workers == 1:
        rows = runMatrix(spec)
    else:
        from twisted.internet import reactor
        resultList = []

        def start():
            d = runMatrixDeferred(spec, workers=workers, reactor=reactor)
            d.addBoth(resultList.append)
            d.addBoth(lambda _: reactor.stop())

        reactor.callWhenRunning(start)
        reactor.run()
        rows = resultList[0]
        if not isinstance(rows, list):
            rows.raiseException()
    _write(args.out, writeResultsCsv(rows))
    if args.plots:
        emitPlots(rows, args.plots)
    numFailed = sum(1 for row in rows if row["status"] != "ok")
    sys.stderr.write("%d rows, %d failed cells\n" % (len(rows), numFailed))
    return 0 if len(rows) == spec.numCells else 1


def makeParser():
    """!Return the argparse parser of the srlgProtect command
    """
    parser = argparse.ArgumentParser(prog="srlgProtect",
        description="SRLG-protected split ratios and shared bandwidth reservations")
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    parser.add_argument("--log", metavar="PATH", help="log everything to PATH_<date>.log")
    parser.add_argument("-v", "--verbose", action="store_true", help="echo info messages to stdout (with --log)")
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    subparsers.required = True

    sub = subparsers.add_parser("parse", help="convert an SNDLIB or GraphML file to instance JSON")
    sub.add_argument("file")
    sub.add_argument("--format", choices=("sndlib", "graphml"), help="default: from the file extension")
    sub.add_argument("--epsilon", type=float, help="largest failing fraction is 1 - epsilon (default 0.01)")
    sub.add_argument("--default-capacity", type=float, default=10000.0, help="GraphML capacity if none given")
    sub.add_argument("--default-cost", type=float, default=1.0, help="GraphML cost if none given")
    sub.add_argument("--out", help="output file (default stdout)")
    sub.set_defaults(func=doParse)

    sub = subparsers.add_parser("gen-demands", help="generate random tunnels")
    sub.add_argument("--instance", required=True)
    sub.add_argument("--tunnels", type=int, required=True)
    sub.add_argument("--demand-min", type=float, default=1.0)
    sub.add_argument("--demand-max", type=float, default=100.0)
    sub.add_argument("--protected-fraction", type=float, default=0.4)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out")
    sub.set_defaults(func=doGenDemands)

    sub = subparsers.add_parser("paths", help="generate candidate paths")
    sub.add_argument("--instance", required=True)
    sub.add_argument("--q", type=int, help="use every set of q links as an SRLG")
    sub.add_argument("--paths-per-tunnel", type=int, default=3)
    sub.add_argument("--expansion", type=int, default=30)
    sub.add_argument("--metric", choices=PathGenConfig.Metrics, default="hop")
    sub.add_argument("--allow-fewer", action="store_true", help="keep tunnels with fewer paths")
    sub.add_argument("--out")
    sub.set_defaults(func=doPaths)

    sub = subparsers.add_parser("train-approx", help="train the convex surrogate")
    sub.add_argument("--epochs", type=int, default=300)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--lambda-under", type=float, default=0.0, help="extra weight of under-approximation")
    sub.add_argument("--learning-rate", type=float, default=1e-2)
    sub.add_argument("--neurons-per-kind", type=int, default=5)
    sub.add_argument("--audit-trials", type=int, default=10000)
    sub.add_argument("--out")
    sub.set_defaults(func=doTrainApprox)

    sub = subparsers.add_parser("solve", help="compute split ratios and reservations")
    sub.add_argument("--instance", required=True)
    sub.add_argument("--paths", required=True)
    sub.add_argument("--surrogate", help="surrogate JSON from train-approx")
    sub.add_argument("--regression", action="store_true", help="use the regression plane (NKCP-R)")
    sub.add_argument("--q", type=int, help="use every set of q links as an SRLG")
    sub.add_argument("--tolerance", type=float, default=1e-6)
    sub.add_argument("--time-limit", type=float, default=600.0)
    sub.add_argument("--max-iterations", type=int, default=10000)
    sub.add_argument("--encoding", choices=SolveLimits.Encodings, default="equality")
    sub.add_argument("--deepest-cut", action="store_true", help="add one cut per round")
    sub.add_argument("--no-warm-start", action="store_true", help="solve each round from scratch")
    sub.add_argument("--lp-solver", choices=("simplex", "highs"), default="simplex")
    sub.add_argument("--splits", help="split ratio JSON to pin")
    sub.add_argument("--out")
    sub.set_defaults(func=doSolve)

    sub = subparsers.add_parser("evaluate", help="exact reservations of split ratios")
    sub.add_argument("--instance", required=True)
    sub.add_argument("--paths", required=True)
    sub.add_argument("--splits", required=True)
    sub.add_argument("--q", type=int, help="use every set of q links as an SRLG")
    sub.add_argument("--out", help="reservation CSV (default stdout)")
    sub.set_defaults(func=doEvaluate)

    sub = subparsers.add_parser("bench", help="run an experiment matrix")
    sub.add_argument("--spec", required=True, help="experiment spec JSON")
    sub.add_argument("--out", help="results CSV (default stdout)")
    sub.add_argument("--plots", metavar="DIR", help="write plot data files to DIR")
    sub.add_argument("--workers", type=int, help="default: $SRLGPROTECT_WORKERS or 1")
    sub.set_defaults(func=doBench)
    return parser


def main(argv=None):
    """!Run the command line; return the exit status
    """
    args = makeParser().parse_args(argv)
    if args.log:
        startFileLogging(args.log, consoleLevel=log.logger.INFO if args.verbose else log.logger.WARNING)
    try:
        return args.func(args)
    except ReportedErrors as e:
        sys.stderr.write("Error: %s\n" % (e,))
        return 1
    finally:
        if args.log:
            stopLogging()
