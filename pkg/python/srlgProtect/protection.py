"""!Exact evaluation of SRLG protection for given split ratios

When the SRLG S fails, tunnel k loses the share w^k_S of its traffic that crossed S; that share is
moved to the surviving paths in proportion to their ratios, so a surviving path p carries
x_p / (1 - w^k_S). The load of protected tunnels on link e after S fails is therefore

    sum over protected k of d_k * w^{ek}_S / (1 - w^k_S)

where w^{ek}_S is the ratio of k on the paths through e that avoid S. The reservation of e is the
largest such load over all SRLGs. Nothing here uses the surrogate.
"""
from collections import namedtuple
import csv
import io
import itertools

import numpy as np

from .instance import InvalidParameterError

__all__ = ["TotalFailureError", "DivisionGuardError", "InvalidBaselineError", "CostBreakdown",
    "CapacityViolation", "ReservationRow", "DivisionGuard", "validateSplits", "equalSplits", "transferRatios",
    "reroutedLoad", "reroutedLoadMatrix", "exactReservation", "exactReservations", "totalCost",
    "checkCapacity", "onePlusOneCost", "reservationTable", "writeReservationCsv", "gridOracle"]

# a tunnel whose failed ratio reaches 1 - DivisionGuard has (numerically) no surviving path
DivisionGuard = 1e-12
SplitTol = 1e-8
CapacityTol = 1e-6


class TotalFailureError(Exception):
    """!An SRLG failure removes every path of a tunnel, so its traffic cannot be rerouted
    """
    def __init__(self, tunnelId, srlgId, failedRatio):
        self.tunnelId = tunnelId
        self.srlgId = srlgId
        self.failedRatio = failedRatio
        Exception.__init__(self, "failure of SRLG %s removes ratio %.12g of tunnel %s" %
            (srlgId, failedRatio, tunnelId))


class DivisionGuardError(TotalFailureError):
    """!A rerouted load needs 1 / (1 - w^k_S) with w^k_S too close to 1
    """
    pass


class InvalidBaselineError(ValueError):
    """!The two paths of a 1+1 baseline are not disjoint
    """
    pass


CostBreakdown = namedtuple("CostBreakdown", "reservationCost routingCost")
CostBreakdown.total = property(lambda self: self.reservationCost + self.routingCost)

CapacityViolation = namedtuple("CapacityViolation", "linkId srlgId load capacity")

ReservationRow = namedtuple("ReservationRow", "linkId reservation argmaxSrlg")


def validateSplits(pathSet, splits, tol=SplitTol):
    """!Check that splits give every tunnel of pathSet ratios in [0, 1] summing to 1

    @param[in] pathSet  a TunnelPathSet
    @param[in] splits  dict of tunnel id: dict of path id: ratio; missing paths have ratio 0
    @throw InvalidParameterError describing the first problem found
    """
    for tunnelId in pathSet.tunnelIds:
        if tunnelId not in splits:
            raise InvalidParameterError("no split ratios for tunnel %s" % (tunnelId,))
        ratios = splits[tunnelId]
        pathIds = set(path.id for path in pathSet.paths(tunnelId))
        for pathId, ratio in ratios.items():
            if pathId not in pathIds:
                raise InvalidParameterError("tunnel %s has no path %s" % (tunnelId, pathId))
            if not -tol <= ratio <= 1 + tol:
                raise InvalidParameterError("ratio %r of path %s is not in [0, 1]" % (ratio, pathId))
        total = sum(ratios.values())
        if abs(total - 1.0) > tol:
            raise InvalidParameterError("ratios of tunnel %s sum to %.12g, not 1" % (tunnelId, total))


def equalSplits(pathSet):
    """!Split every tunnel evenly over its paths
    """
    splits = dict()
    for tunnelId in pathSet.tunnelIds:
        paths = pathSet.paths(tunnelId)
        splits[tunnelId] = dict((path.id, 1.0 / len(paths)) for path in paths)
    return splits


def transferRatios(pathSet, tunnelId, splits, srlgId):
    """!Ratios of a tunnel's paths after an SRLG fails

    Failed paths get 0; each surviving path p gets x_p / (1 - w) where w is the failed ratio.

    @param[in] pathSet  a TunnelPathSet
    @param[in] tunnelId  the tunnel
    @param[in] splits  split ratios (see validateSplits)
    @param[in] srlgId  the failing SRLG
    @return dict of path id: ratio after the failure

    @throw TotalFailureError if the failed ratio is 1 (within DivisionGuard)
    """
    ratios = splits[tunnelId]
    failed = pathSet.pathsIntersecting(tunnelId, srlgId)
    failedRatio = sum(ratios.get(pathId, 0.0) for pathId in failed)
    if failedRatio >= 1.0 - DivisionGuard:
        raise TotalFailureError(tunnelId, srlgId, failedRatio)
    scale = 1.0 - failedRatio
    return dict((path.id, 0.0 if path.id in failed else ratios.get(path.id, 0.0) / scale)
        for path in pathSet.paths(tunnelId))


class _TunnelArrays(object):
    """!Incidence arrays of one tunnel's paths
    """
    def __init__(self, pathSet, tunnel, linkIndex):
        instance = pathSet.instance
        self.tunnel = tunnel
        self.paths = pathSet.paths(tunnel.id)
        self.pathIds = [path.id for path in self.paths]
        self.linkIncidence = np.zeros((len(self.paths), len(linkIndex)))
        self.srlgIncidence = np.zeros((len(self.paths), len(instance.srlgs)), dtype=bool)
        for i, path in enumerate(self.paths):
            for linkId in path.links:
                self.linkIncidence[i, linkIndex[linkId]] = 1.0
            for srlgInd in pathSet.pathSrlgIndices(path.id):
                self.srlgIncidence[i, srlgInd] = True
        self.costs = np.array([path.cost for path in self.paths], dtype=float)

    def ratioVector(self, splits):
        ratios = splits[self.tunnel.id]
        return np.array([ratios.get(pathId, 0.0) for pathId in self.pathIds], dtype=float)


class _LoadModel(object):
    """!Vectorized loads of all tunnels of a TunnelPathSet
    """
    def __init__(self, pathSet):
        self.pathSet = pathSet
        self.instance = pathSet.instance
        self.linkIds = self.instance.linkIds
        self.linkIndex = dict((linkId, ind) for ind, linkId in enumerate(self.linkIds))
        self.srlgIds = tuple(srlg.id for srlg in self.instance.srlgs)
        self.tunnels = [_TunnelArrays(pathSet, self.instance.getTunnel(tunnelId), self.linkIndex)
            for tunnelId in pathSet.tunnelIds]

    def protectedLoads(self, splits):
        """!Return (pre-failure load per link, rerouted load per [link, srlg]) of protected tunnels
        """
        numLinks = len(self.linkIds)
        preFailure = np.zeros(numLinks)
        rerouted = np.zeros((numLinks, len(self.srlgIds)))
        for arrays in self.tunnels:
            if not arrays.tunnel.protected:
                continue
            x = arrays.ratioVector(splits)
            demand = arrays.tunnel.demand
            preFailure += demand * (x @ arrays.linkIncidence)
            if not self.srlgIds:
                continue
            failed = x @ arrays.srlgIncidence
            bad = np.flatnonzero(failed >= 1.0 - DivisionGuard)
            if len(bad):
                raise DivisionGuardError(arrays.tunnel.id, self.srlgIds[bad[0]], float(failed[bad[0]]))
            surviving = (arrays.linkIncidence * x[:, None]).T @ (~arrays.srlgIncidence)
            rerouted += demand * surviving / (1.0 - failed)[None, :]
        return preFailure, rerouted

    def unprotectedLoad(self, splits):
        load = np.zeros(len(self.linkIds))
        for arrays in self.tunnels:
            if arrays.tunnel.protected:
                continue
            load += arrays.tunnel.demand * (arrays.ratioVector(splits) @ arrays.linkIncidence)
        return load

    def reservations(self, splits):
        """!Return (reservation per link, index of the maximizing SRLG or -1)
        """
        preFailure, rerouted = self.protectedLoads(splits)
        if not self.srlgIds:
            return preFailure, np.full(len(self.linkIds), -1)
        return rerouted.max(axis=1), rerouted.argmax(axis=1)

    def routingCost(self, splits):
        return float(sum(arrays.tunnel.demand * (arrays.ratioVector(splits) @ arrays.costs)
            for arrays in self.tunnels))

    def linkCosts(self):
        return np.array([self.instance.getLink(linkId).cost for linkId in self.linkIds], dtype=float)


def reroutedLoadMatrix(pathSet, splits):
    """!Load of protected tunnels on every link after every SRLG failure

    @return (link ids, SRLG ids, array [link, srlg])
    @throw DivisionGuardError if some failure leaves a protected tunnel without traffic
    """
    model = _LoadModel(pathSet)
    _, rerouted = model.protectedLoads(splits)
    return model.linkIds, model.srlgIds, rerouted


def reroutedLoad(pathSet, splits, linkId, srlgId):
    """!Load of protected tunnels on a link after an SRLG fails: sum of d_k w^{ek}_S / (1 - w^k_S)

    Unprotected tunnels are not included.

    @throw InstanceError if the link or SRLG is unknown
    @throw DivisionGuardError if a protected tunnel has w^k_S >= 1 - DivisionGuard
    """
    instance = pathSet.instance
    instance.getLink(linkId)
    instance.getSrlg(srlgId)
    load = 0.0
    for tunnel in instance.protectedTunnels:
        if not pathSet.hasTunnel(tunnel.id):
            continue
        ratios = splits[tunnel.id]
        failed = pathSet.pathsIntersecting(tunnel.id, srlgId)
        failedRatio = sum(ratios.get(pathId, 0.0) for pathId in failed)
        if failedRatio >= 1.0 - DivisionGuard:
            raise DivisionGuardError(tunnel.id, srlgId, failedRatio)
        surviving = pathSet.pathsThroughEdge(tunnel.id, linkId) - failed
        load += tunnel.demand * sum(ratios.get(pathId, 0.0) for pathId in surviving) / (1.0 - failedRatio)
    return load


def exactReservation(pathSet, splits, linkId):
    """!Bandwidth reserved on a link: the largest rerouted load over all SRLGs

    With no SRLGs this is the pre-failure load of the protected tunnels.
    """
    model = _LoadModel(pathSet)
    reservations, _ = model.reservations(splits)
    try:
        return float(reservations[model.linkIndex[linkId]])
    except KeyError:
        pathSet.instance.getLink(linkId)
        raise


def exactReservations(pathSet, splits):
    """!Return dict of link id: exact reservation, for every link
    """
    model = _LoadModel(pathSet)
    reservations, _ = model.reservations(splits)
    return dict((linkId, float(value)) for linkId, value in zip(model.linkIds, reservations))


def totalCost(pathSet, splits):
    """!Reservation cost sum of c_e w_e plus routing cost sum of d_k c_p x_p (all tunnels)

    @return a CostBreakdown
    """
    model = _LoadModel(pathSet)
    reservations, _ = model.reservations(splits)
    return CostBreakdown(float(model.linkCosts() @ reservations), model.routingCost(splits))


def checkCapacity(pathSet, splits, tol=CapacityTol):
    """!List every (link, SRLG) whose load after the failure exceeds the link capacity

    The load is the unprotected traffic on the link (not rerouted) plus the rerouted protected load.
    With no SRLGs the pre-failure load is checked and srlgId is None.

    @return a list of CapacityViolation
    """
    model = _LoadModel(pathSet)
    instance = model.instance
    capacities = np.array([instance.getLink(linkId).capacity for linkId in model.linkIds], dtype=float)
    unprotected = model.unprotectedLoad(splits)
    preFailure, rerouted = model.protectedLoads(splits)
    violations = []
    if not model.srlgIds:
        loads = unprotected + preFailure
        for i in np.flatnonzero(loads > capacities + tol):
            violations.append(CapacityViolation(model.linkIds[i], None, float(loads[i]), float(capacities[i])))
        return violations
    loads = unprotected[:, None] + rerouted
    for i, j in zip(*np.nonzero(loads > capacities[:, None] + tol)):
        violations.append(CapacityViolation(model.linkIds[i], model.srlgIds[j], float(loads[i, j]),
            float(capacities[i])))
    return violations


def onePlusOneCost(demand, primary, backup, costs, srlgs=()):
    """!Cost of 1+1 protection: the demand is carried on both paths

    @param[in] demand  tunnel demand
    @param[in] primary  primary Path
    @param[in] backup  backup Path
    @param[in] costs  dict of link id: unit cost (or a NetworkInstance)
    @param[in] srlgs  SRLGs that must not hit both paths
    @return demand * (cost of primary links + cost of backup links)

    @throw InvalidBaselineError if the paths share a link or an SRLG
    """
    if hasattr(costs, "getLink"):
        instance = costs
        costs = dict((link.id, link.cost) for link in instance.links)
    common = primary.linkSet & backup.linkSet
    if common:
        raise InvalidBaselineError("paths %s and %s share links %s" % (primary.id, backup.id, sorted(common)))
    for srlg in srlgs:
        if not srlg.linkSet.isdisjoint(primary.links) and not srlg.linkSet.isdisjoint(backup.links):
            raise InvalidBaselineError("paths %s and %s share SRLG %s" % (primary.id, backup.id, srlg.id))
    return demand * (sum(costs[linkId] for linkId in primary.links) + sum(costs[linkId] for linkId in backup.links))


def reservationTable(pathSet, splits):
    """!Per-link reservations with the SRLG whose failure sets them (None if no failure does)

    @return a list of ReservationRow in link order
    """
    model = _LoadModel(pathSet)
    reservations, argmax = model.reservations(splits)
    rows = []
    for linkId, value, srlgInd in zip(model.linkIds, reservations, argmax):
        argmaxSrlg = model.srlgIds[srlgInd] if srlgInd >= 0 and value > 0 else None
        rows.append(ReservationRow(linkId, float(value), argmaxSrlg))
    return rows


def writeReservationCsv(rows):
    """!Return reservation rows as CSV text with header link_id,reservation,argmax_srlg
    """
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("link_id", "reservation", "argmax_srlg"))
    for row in rows:
        writer.writerow((row.linkId, repr(row.reservation), "" if row.argmaxSrlg is None else row.argmaxSrlg))
    return out.getvalue()


def _compositions(numParts, numSteps):
    """!All tuples of numParts nonnegative ints summing to numSteps
    """
    for cuts in itertools.combinations(range(numSteps + numParts - 1), numParts - 1):
        prev = -1
        parts = []
        for cut in cuts:
            parts.append(cut - prev - 1)
            prev = cut
        parts.append(numSteps + numParts - 1 - prev - 1)
        yield tuple(parts)


def gridOracle(pathSet, tunnelId, step=0.01, baseSplits=None):
    """!Brute-force the split ratios of one protected tunnel on a grid

    Every split with ratios in multiples of step is tried, keeping the other tunnels' splits fixed.
    Splits that put more than 1 - epsilon of the tunnel on one SRLG or overload a link are skipped.

    @param[in] pathSet  a TunnelPathSet
    @param[in] tunnelId  the tunnel to vary
    @param[in] step  grid step; 1 / step must be an integer
    @param[in] baseSplits  splits of the other tunnels (default: equal splits)
    @return (best total cost, best splits), or (inf, None) if no grid split is admissible
    """
    numSteps = int(round(1.0 / step))
    if numSteps < 1 or abs(numSteps * step - 1.0) > 1e-9:
        raise InvalidParameterError("step=%r must divide 1" % (step,))
    splits = dict(baseSplits) if baseSplits is not None else equalSplits(pathSet)
    paths = pathSet.paths(tunnelId)
    epsilon = pathSet.instance.epsilon
    model = _LoadModel(pathSet)
    linkCosts = model.linkCosts()
    capacities = np.array([model.instance.getLink(linkId).capacity for linkId in model.linkIds], dtype=float)
    checkLoads = np.isfinite(capacities).any()
    arrays = [a for a in model.tunnels if a.tunnel.id == tunnelId][0]

    bestCost = float("inf")
    bestSplits = None
    for parts in _compositions(len(paths), numSteps):
        splits[tunnelId] = dict((path.id, part / float(numSteps)) for path, part in zip(paths, parts))
        try:
            preFailure, rerouted = model.protectedLoads(splits)
        except DivisionGuardError:
            continue
        if len(model.srlgIds) and (arrays.ratioVector(splits) @ arrays.srlgIncidence).max() > 1 - epsilon + 1e-12:
            continue
        if checkLoads:
            loads = model.unprotectedLoad(splits)[:, None] + (rerouted if len(model.srlgIds) else preFailure[:, None])
            if np.any(loads > capacities[:, None] + CapacityTol):
                continue
        reservations = rerouted.max(axis=1) if len(model.srlgIds) else preFailure
        cost = float(linkCosts @ reservations) + model.routingCost(splits)
        if cost < bestCost - 1e-12:
            bestCost = cost
            bestSplits = dict((k, dict(v)) for k, v in splits.items())
    return bestCost, bestSplits
