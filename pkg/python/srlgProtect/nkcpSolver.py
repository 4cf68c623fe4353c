"""!Kelley cutting-plane solver for SRLG-protected split ratios

The master linear program has
- split ratios x_p in [0, 1] for every path, with one "sum to 1" row per tunnel
- for protected tunnels, w^k_S in [0, 1 - epsilon]: the ratio of tunnel k crossing SRLG S
- for protected tunnels, w^{ek}_S in [0, 1]: the ratio of tunnel k on link e avoiding S
- reservations w_e >= 0 for every link

and minimizes sum of c_e w_e + sum of d_k c_p x_p. SRLGs that hit the same paths of a tunnel share
one w^k_S variable; likewise w^{ek}_S is shared by all (e, S) with the same surviving paths through e.

The nonlinear constraints, for every link e and SRLG S,

    reservation: sum over protected k of d_k P(w^{ek}_S, w^k_S) <= w_e
    capacity:    (unprotected load on e) + sum over protected k of d_k P(w^{ek}_S, w^k_S) <= b_e

use the convex surrogate P of x / (1 - y). They are enforced lazily: each round the master is solved,
every violated constraint gets its first-order cut at the LP point, and the loop stops when no
constraint is violated. The reported reservations are recomputed exactly from the split ratios.
"""
from collections import namedtuple
import math
import time

import numpy as np

from .instance import InvalidParameterError
from .log import log
from .lpCore import Infeasible, LinearProgram, SimplexSolver
from .protection import DivisionGuardError, checkCapacity, exactReservations, reservationTable, totalCost, \
    validateSplits

__all__ = ["MasterBuildError", "SolveLimits", "ConstraintGroup", "Cut", "MasterProgram", "SolveReport",
    "ExactResult", "buildMaster", "separate", "solveNkcp", "exactPostprocess"]

EqualityEncoding = "equality"
InequalityEncoding = "inequality"


class MasterBuildError(Exception):
    """!The master program cannot be built (e.g. a tunnel has no paths)
    """
    pass


class SolveLimits(object):
    """!Stopping rules and options of solveNkcp
    """
    Encodings = (EqualityEncoding, InequalityEncoding)

    def __init__(self, tolerance=1e-6, maxIterations=10000, timeLimit=600.0, encoding=EqualityEncoding,
        deepestCutOnly=False, warmStart=True, solver=None):
        """!Construct SolveLimits

        @param[in] tolerance  relative violation above which a constraint is cut
        @param[in] maxIterations  maximum number of rounds (master solves)
        @param[in] timeLimit  wall-clock limit (sec)
        @param[in] encoding  "equality": the w variables equal the sums of split ratios they stand for;
            "inequality": they are only bounded below by those sums, and w^{ek}_S + w^k_S <= 1 is added
        @param[in] deepestCutOnly  add only the most violated cut each round, instead of one per violated
            (link, SRLG) constraint
        @param[in] warmStart  start each master solve from the previous optimal basis
        @param[in] solver  LP solver with a solve(lp, warmStart) method; None for a SimplexSolver

        @throw InvalidParameterError if a parameter is out of range
        """
        if tolerance <= 0:
            raise InvalidParameterError("tolerance=%r must be > 0" % (tolerance,))
        if maxIterations < 1:
            raise InvalidParameterError("maxIterations=%r must be >= 1" % (maxIterations,))
        if timeLimit <= 0:
            raise InvalidParameterError("timeLimit=%r must be > 0" % (timeLimit,))
        if encoding not in self.Encodings:
            raise InvalidParameterError("encoding=%r must be one of %s" % (encoding, self.Encodings))
        self.tolerance = float(tolerance)
        self.maxIterations = int(maxIterations)
        self.timeLimit = float(timeLimit)
        self.encoding = encoding
        self.deepestCutOnly = bool(deepestCutOnly)
        self.warmStart = bool(warmStart)
        self.solver = solver if solver is not None else SimplexSolver()

    def __repr__(self):
        return "%s(tolerance=%s, maxIterations=%s, timeLimit=%s, encoding=%r, deepestCutOnly=%s)" % \
            (type(self).__name__, self.tolerance, self.maxIterations, self.timeLimit, self.encoding,
            self.deepestCutOnly)


Term = namedtuple("Term", "tunnelId demand wekVar wkVar")


class ConstraintGroup(object):
    """!The (link, SRLG) constraints of one link that share the same terms

    srlgIds lists the SRLGs in enumeration order; the first one represents the group.
    A tunnel appears in terms only if some of its paths through the link avoid the SRLGs.
    """
    def __init__(self, linkId, weVar, terms, capacity, linearTerms):
        self.linkId = linkId
        self.weVar = weVar
        self.terms = tuple(terms)
        self.capacity = capacity
        self.linearTerms = tuple(linearTerms)
        self.srlgIds = []

    @property
    def srlgId(self):
        return self.srlgIds[0]

    @property
    def hasCapacity(self):
        return math.isfinite(self.capacity)

    def termValues(self, values):
        """!Return arrays (demand, w^{ek}_S, w^k_S) of the terms at values
        """
        demands = np.array([term.demand for term in self.terms], dtype=float)
        u = np.array([values[term.wekVar] for term in self.terms], dtype=float)
        v = np.array([values[term.wkVar] if term.wkVar is not None else 0.0 for term in self.terms], dtype=float)
        return demands, u, v

    def linearLoad(self, values):
        return float(sum(demand * values[xVar] for xVar, demand in self.linearTerms))

    def __repr__(self):
        return "%s(link=%s, srlg=%s, terms=%d)" % (type(self).__name__, self.linkId, self.srlgId, len(self.terms))


class Cut(object):
    """!A first-order cut of a reservation or capacity constraint, as an LP row coeffs . z <= rhs
    """
    Reservation = "reservation"
    Capacity = "capacity"

    def __init__(self, kind, group, point, coeffs, rhs, violation):
        """!Construct a Cut

        @param[in] kind  Cut.Reservation or Cut.Capacity
        @param[in] group  the ConstraintGroup cut
        @param[in] point  the generation point: tuple of (w^{ek}_S, w^k_S) per term
        @param[in] coeffs  dict of variable index: coefficient
        @param[in] rhs  right-hand side
        @param[in] violation  relative violation of the constraint at the generation point
        """
        self.kind = kind
        self.group = group
        self.point = tuple(point)
        self.coeffs = dict(coeffs)
        self.rhs = float(rhs)
        self.violation = float(violation)

    @property
    def linkId(self):
        return self.group.linkId

    @property
    def srlgId(self):
        return self.group.srlgId

    def linearValue(self, values):
        """!Value of the linearized constraint function at values (the cut holds iff it is <= 0)
        """
        return float(sum(coef * values[ind] for ind, coef in self.coeffs.items())) - self.rhs

    def constraintValue(self, values, surrogate):
        """!Value of the surrogate constraint function at values (it holds iff it is <= 0)
        """
        demands, u, v = self.group.termValues(values)
        total = float(demands @ np.asarray(surrogate.evaluate(u, v))) if len(demands) else 0.0
        if self.kind == self.Reservation:
            return total - values[self.group.weVar]
        return self.group.linearLoad(values) + total - self.group.capacity

    def __repr__(self):
        return "%s(%s, link=%s, srlg=%s, violation=%.3g)" % \
            (type(self).__name__, self.kind, self.linkId, self.srlgId, self.violation)


class MasterProgram(object):
    """!The master linear program with its variable maps, constraint groups and cuts
    """
    def __init__(self, pathSet, encoding=EqualityEncoding):
        self.pathSet = pathSet
        self.instance = pathSet.instance
        self.encoding = encoding
        self.lp = LinearProgram("nkcpMaster")
        self.xIndex = dict()
        self.wkIndex = dict()
        self.wekIndex = dict()
        self.weIndex = dict()
        self.groups = []
        self.cuts = []
        self.cutCounts = {Cut.Reservation: 0, Cut.Capacity: 0}

    @property
    def numVarsByKind(self):
        return dict(x=len(self.xIndex), wk=len(self.wkIndex), wek=len(self.wekIndex), we=len(self.weIndex))

    def splits(self, values):
        """!Split ratios at an LP point, clipped to [0, 1] and rescaled to sum exactly to 1
        """
        splits = dict()
        for tunnelId in self.pathSet.tunnelIds:
            ratios = dict()
            for path in self.pathSet.paths(tunnelId):
                ratios[path.id] = min(max(float(values[self.xIndex[(tunnelId, path.id)]]), 0.0), 1.0)
            total = sum(ratios.values())
            if total > 0:
                ratios = dict((pathId, ratio / total) for pathId, ratio in ratios.items())
            splits[tunnelId] = ratios
        return splits

    def fixSplits(self, splits):
        """!Pin split ratios through the bounds of the x variables

        @throw InvalidParameterError if splits are invalid for the path set
        """
        validateSplits(self.pathSet, splits)
        for (tunnelId, pathId), ind in self.xIndex.items():
            ratio = min(max(splits[tunnelId].get(pathId, 0.0), 0.0), 1.0)
            self.lp.setBounds(ind, ratio, ratio)

    def addCuts(self, cuts):
        for cut in cuts:
            self.lp.addRow(cut.coeffs, "<=", cut.rhs, name="cut_%s_%s_%s_%d" %
                (cut.kind[:3], cut.linkId, cut.srlgId, len(self.cuts)))
            self.cuts.append(cut)
            self.cutCounts[cut.kind] += 1

    def __repr__(self):
        return "%s(%s, groups=%d, cuts=%d)" % (type(self).__name__, self.lp, len(self.groups), len(self.cuts))


def buildMaster(pathSet, surrogate=None, encoding=EqualityEncoding):
    """!Build the master program without cuts

    @param[in] pathSet  TunnelPathSet covering every tunnel of its instance
    @param[in] surrogate  unused by the linear part; accepted so callers can pass the solve inputs unchanged
    @param[in] encoding  "equality" or "inequality" (see SolveLimits)
    @return a MasterProgram

    @throw MasterBuildError if a tunnel has no paths
    """
    instance = pathSet.instance
    master = MasterProgram(pathSet, encoding)
    lp = master.lp
    sense = "=" if encoding == EqualityEncoding else ">="

    for tunnel in instance.tunnels:
        if not pathSet.hasTunnel(tunnel.id) or not pathSet.paths(tunnel.id):
            raise MasterBuildError("tunnel %s has no paths" % (tunnel.id,))
        coeffs = []
        for path in pathSet.paths(tunnel.id):
            ind = lp.addVariable("x[%s]" % (path.id,), 0.0, 1.0, tunnel.demand * path.cost)
            master.xIndex[(tunnel.id, path.id)] = ind
            coeffs.append((ind, 1.0))
        lp.addRow(coeffs, "=", 1.0, name="split_%s" % (tunnel.id,))

    for link in instance.links:
        master.weIndex[link.id] = lp.addVariable("w[%s]" % (link.id,), 0.0, float("inf"), link.cost)

    def xTerms(tunnelId, pathIds):
        return [(master.xIndex[(tunnelId, pathId)], 1.0) for pathId in sorted(pathIds)]

    def wkVar(tunnelId, failed):
        if not failed:
            return None
        key = (tunnelId, failed)
        if key not in master.wkIndex:
            ind = lp.addVariable("wk[%s,%d]" % (tunnelId, len(master.wkIndex)), 0.0, 1.0 - instance.epsilon)
            master.wkIndex[key] = ind
            lp.addRow(xTerms(tunnelId, failed) + [(ind, -1.0)], _flip(sense), 0.0,
                name="crossing_%s_%d" % (tunnelId, ind))
        return master.wkIndex[key]

    def wekVar(tunnelId, linkId, surviving, wkInd):
        key = (tunnelId, linkId, surviving)
        if key not in master.wekIndex:
            ind = lp.addVariable("wek[%s,%s,%d]" % (tunnelId, linkId, len(master.wekIndex)), 0.0, 1.0)
            master.wekIndex[key] = ind
            lp.addRow(xTerms(tunnelId, surviving) + [(ind, -1.0)], _flip(sense), 0.0,
                name="surviving_%s_%s_%d" % (tunnelId, linkId, ind))
        ind = master.wekIndex[key]
        if encoding == InequalityEncoding and wkInd is not None:
            validKey = (ind, wkInd)
            if validKey not in master._validPairs:
                master._validPairs.add(validKey)
                lp.addRow([(ind, 1.0), (wkInd, 1.0)], "<=", 1.0, name="disjoint_%d_%d" % validKey)
        return ind

    master._validPairs = set()
    protected = [tunnel for tunnel in instance.protectedTunnels if pathSet.hasTunnel(tunnel.id)]
    unprotected = [tunnel for tunnel in instance.unprotectedTunnels if pathSet.hasTunnel(tunnel.id)]
    srlgs = instance.srlgs

    failedDict = dict()
    for tunnel in protected:
        failedDict[tunnel.id] = [pathSet.pathsIntersecting(tunnel.id, srlg.id) for srlg in srlgs]

    for link in instance.links:
        weInd = master.weIndex[link.id]
        throughDict = dict((tunnel.id, pathSet.pathsThroughEdge(tunnel.id, link.id)) for tunnel in protected)
        linearTerms = []
        for tunnel in unprotected:
            for pathId in sorted(pathSet.pathsThroughEdge(tunnel.id, link.id)):
                linearTerms.append((master.xIndex[(tunnel.id, pathId)], tunnel.demand))

        if math.isfinite(link.capacity) and linearTerms:
            lp.addRow(linearTerms, "<=", link.capacity, name="base_capacity_%s" % (link.id,))

        if not srlgs:
            # no failure scenario: reserve the pre-failure protected load
            coeffs = [(weInd, -1.0)]
            totalTerms = list(linearTerms)
            for tunnel in protected:
                for pathId in sorted(throughDict[tunnel.id]):
                    coeffs.append((master.xIndex[(tunnel.id, pathId)], tunnel.demand))
                    totalTerms.append((master.xIndex[(tunnel.id, pathId)], tunnel.demand))
            if len(coeffs) > 1:
                lp.addRow(coeffs, "<=", 0.0, name="reserve_%s" % (link.id,))
            if math.isfinite(link.capacity) and len(totalTerms) > len(linearTerms):
                lp.addRow(totalTerms, "<=", link.capacity, name="capacity_%s" % (link.id,))
            continue

        groupDict = dict()
        for srlgInd, srlg in enumerate(srlgs):
            terms = []
            for tunnel in protected:
                failed = failedDict[tunnel.id][srlgInd]
                surviving = throughDict[tunnel.id] - failed
                if not surviving:
                    continue
                wkInd = wkVar(tunnel.id, failed)
                terms.append(Term(tunnel.id, tunnel.demand, wekVar(tunnel.id, link.id, surviving, wkInd), wkInd))
            if not terms:
                continue
            signature = tuple((term.wekVar, term.wkVar) for term in terms)
            group = groupDict.get(signature)
            if group is None:
                group = ConstraintGroup(link.id, weInd, terms, link.capacity, linearTerms)
                groupDict[signature] = group
                master.groups.append(group)
            group.srlgIds.append(srlg.id)

    # every crossing ratio is bounded by 1 - epsilon, including SRLGs that hit no link
    # carrying a surviving path
    for tunnel in protected:
        for failed in failedDict[tunnel.id]:
            wkVar(tunnel.id, failed)

    del master._validPairs
    log.info("built master: %s, variables %s, %d constraint groups" % (lp, master.numVarsByKind, len(master.groups)))
    return master


def _flip(sense):
    """!Sense of "sum of x - w {sense} 0" for w {encoding sense} sum of x
    """
    return {"=": "=", ">=": "<="}[sense]


def separate(master, values, surrogate, tolerance=1e-6, deepestCutOnly=False):
    """!Find the surrogate constraints violated at an LP point and return their cuts

    A reservation constraint is violated if its value exceeds tolerance * max(1, |w_e|);
    a capacity constraint if it exceeds tolerance * max(1, b_e). Each violated constraint gets
    the cut coeffs . z <= rhs obtained by linearizing every P term at the point.

    @param[in] master  a MasterProgram
    @param[in] values  LP variable values
    @param[in] surrogate  the ConvexSurrogate
    @param[in] tolerance  relative violation tolerance
    @param[in] deepestCutOnly  return only the most violated cut
    @return (list of Cut in group order, largest relative violation (0 if none))
    """
    groups = master.groups
    if not groups:
        return [], 0.0
    sizes = [len(group.terms) for group in groups]
    demands = np.empty(sum(sizes))
    u = np.empty(sum(sizes))
    v = np.empty(sum(sizes))
    pos = 0
    for group, size in zip(groups, sizes):
        demands[pos:pos + size], u[pos:pos + size], v[pos:pos + size] = group.termValues(values)
        pos += size
    pValues = np.asarray(surrogate.evaluate(u, v), dtype=float)
    gradX, gradY = surrogate.gradient(u, v)
    gradX = np.asarray(gradX, dtype=float)
    gradY = np.asarray(gradY, dtype=float)
    weighted = demands * pValues
    offsets = demands * (pValues - gradX * u - gradY * v)

    cuts = []
    maxViolation = 0.0
    pos = 0
    for group, size in zip(groups, sizes):
        span = slice(pos, pos + size)
        pos += size
        surrogateLoad = float(weighted[span].sum())
        offset = float(offsets[span].sum())
        candidates = []
        reserved = float(values[group.weVar])
        resViolation = (surrogateLoad - reserved) / max(1.0, abs(reserved))
        candidates.append((Cut.Reservation, resViolation, 0.0))
        if group.hasCapacity:
            capViolation = (group.linearLoad(values) + surrogateLoad - group.capacity) / max(1.0, group.capacity)
            candidates.append((Cut.Capacity, capViolation, group.capacity))
        for kind, violation, bound in candidates:
            maxViolation = max(maxViolation, violation)
            if violation <= tolerance:
                continue
            coeffs = dict()
            for term, gx, gy, demand in zip(group.terms, gradX[span], gradY[span], demands[span]):
                coeffs[term.wekVar] = coeffs.get(term.wekVar, 0.0) + demand * gx
                if term.wkVar is not None:
                    coeffs[term.wkVar] = coeffs.get(term.wkVar, 0.0) + demand * gy
            if kind == Cut.Reservation:
                coeffs[group.weVar] = coeffs.get(group.weVar, 0.0) - 1.0
            else:
                for xVar, demand in group.linearTerms:
                    coeffs[xVar] = coeffs.get(xVar, 0.0) + demand
            point = tuple(zip(u[span].tolist(), v[span].tolist()))
            cuts.append(Cut(kind, group, point, coeffs, bound - offset, violation))

    if deepestCutOnly and cuts:
        cuts = [max(cuts, key=lambda cut: cut.violation)]
    return cuts, maxViolation


ExactResult = namedtuple("ExactResult", "reservations argmaxSrlgs reservationCost routingCost "
    "capacityViolations feasible")


def exactPostprocess(pathSet, splits):
    """!Exact reservations, costs and capacity verdict for split ratios

    @return an ExactResult; feasible is True if no link load after any SRLG failure exceeds its capacity
    @throw InvalidParameterError if the splits are invalid
    @throw DivisionGuardError if a protected tunnel has (almost) all its traffic on one SRLG
    """
    validateSplits(pathSet, splits)
    reservations = exactReservations(pathSet, splits)
    argmaxSrlgs = dict((row.linkId, row.argmaxSrlg) for row in reservationTable(pathSet, splits))
    cost = totalCost(pathSet, splits)
    violations = checkCapacity(pathSet, splits)
    return ExactResult(reservations, argmaxSrlgs, cost.reservationCost, cost.routingCost, violations,
        not violations)


class SolveReport(object):
    """!Outcome of solveNkcp
    """
    def __init__(self):
        self.splits = dict()
        self.reservations = dict()
        self.reservationCost = None
        self.routingCost = None
        self.surrogateObjective = None
        self.iterations = 0
        self.cutsByKind = {Cut.Reservation: 0, Cut.Capacity: 0}
        self.terminationReason = None
        self.feasible = False
        self.capacityViolations = []
        self.lpObjectives = []
        self.cutsPerRound = []
        self.maxViolation = None
        self.wallMs = 0.0
        self.infeasibleIteration = None
        self.message = ""

    @property
    def numCuts(self):
        return sum(self.cutsByKind.values())

    @property
    def objective(self):
        """!Exact objective: reservation cost plus routing cost (None if there are no splits)
        """
        if self.reservationCost is None:
            return None
        return self.reservationCost + self.routingCost

    @property
    def hitLimit(self):
        return self.terminationReason in ("iteration-limit", "time-limit")

    def toDict(self):
        return dict(
            splits = self.splits,
            reservations = self.reservations,
            objective = dict(reservation_cost=self.reservationCost, routing_cost=self.routingCost),
            surrogate_objective = self.surrogateObjective,
            stats = dict(
                iterations = self.iterations,
                cuts = self.numCuts,
                cuts_by_kind = dict(self.cutsByKind),
                wall_ms = self.wallMs,
                lp_objectives = list(self.lpObjectives),
                cuts_per_round = [dict(counts) for counts in self.cutsPerRound],
                max_violation = self.maxViolation,
            ),
            termination = self.terminationReason,
            feasible = self.feasible,
            capacity_violations = [dict(link=v.linkId, srlg=v.srlgId, load=v.load, capacity=v.capacity)
                for v in self.capacityViolations],
            message = self.message,
        )

    def __repr__(self):
        return "%s(termination=%r, objective=%s, iterations=%s, cuts=%s, feasible=%s)" % \
            (type(self).__name__, self.terminationReason, self.objective, self.iterations, self.numCuts,
            self.feasible)


def solveNkcp(pathSet, surrogate, limits=None, fixedSplits=None):
    """!Compute split ratios and reservations with Kelley's cutting-plane method

    @param[in] pathSet  TunnelPathSet (its instance supplies demands, SRLGs, capacities and costs)
    @param[in] surrogate  convex surrogate of x / (1 - y), e.g. a trained ConvexSurrogate or regressionPlane()
    @param[in] limits  SolveLimits; None for the defaults
    @param[in] fixedSplits  if not None, split ratios to pin; only the w variables are optimized
    @return a SolveReport. terminationReason is one of
        "converged", "iteration-limit", "time-limit", "infeasible", "lp-<status>".
        If the master becomes infeasible, infeasibleIteration holds the round index.
    """
    limits = limits or SolveLimits()
    startTime = time.time()
    report = SolveReport()
    master = buildMaster(pathSet, surrogate, limits.encoding)
    if fixedSplits is not None:
        master.fixSplits(fixedSplits)

    lastValues = None
    basis = None
    while True:
        if report.iterations >= limits.maxIterations:
            report.terminationReason = "iteration-limit"
            break
        if time.time() - startTime > limits.timeLimit:
            report.terminationReason = "time-limit"
            break
        solution = limits.solver.solve(master.lp, warmStart=basis if limits.warmStart else None)
        report.iterations += 1
        if not solution.isOptimal:
            if solution.status == Infeasible:
                report.terminationReason = "infeasible"
                report.infeasibleIteration = report.iterations
            else:
                report.terminationReason = "lp-%s" % (solution.status,)
            report.message = solution.message
            log.warn("round %d: master %s (%s)" % (report.iterations, solution.status, solution.message))
            break
        lastValues = solution.values
        basis = solution.basis
        report.lpObjectives.append(solution.objective)
        cuts, maxViolation = separate(master, solution.values, surrogate, limits.tolerance, limits.deepestCutOnly)
        report.maxViolation = maxViolation
        log.debug("round %d: lp objective %.9g, max violation %.3g, %d cuts" %
            (report.iterations, solution.objective, maxViolation, len(cuts)))
        if not cuts:
            report.terminationReason = "converged"
            break
        roundCounts = {Cut.Reservation: 0, Cut.Capacity: 0}
        for cut in cuts:
            roundCounts[cut.kind] += 1
        report.cutsPerRound.append(roundCounts)
        master.addCuts(cuts)

    report.cutsByKind = dict(master.cutCounts)
    if lastValues is not None:
        report.surrogateObjective = report.lpObjectives[-1]
        report.splits = master.splits(lastValues)
        try:
            exact = exactPostprocess(pathSet, report.splits)
        except DivisionGuardError as e:
            report.message = str(e)
            log.warn("exact evaluation failed: %s" % (e,))
        else:
            report.reservations = exact.reservations
            report.reservationCost = exact.reservationCost
            report.routingCost = exact.routingCost
            report.capacityViolations = exact.capacityViolations
            report.feasible = exact.feasible
    report.wallMs = (time.time() - startTime) * 1000.0
    log.info("solve finished: %s after %d rounds, %d cuts, exact objective %s, feasible %s" %
        (report.terminationReason, report.iterations, report.numCuts, report.objective, report.feasible))
    return report
