"""!Network instances: nodes, undirected links, tunnels, SRLGs and candidate paths

Everything here is immutable once built; "with..." methods return new objects.
"""
import itertools
from collections import namedtuple

__all__ = ["InstanceError", "InvalidParameterError", "Violation", "Link", "Tunnel", "Path", "Srlg",
    "NetworkInstance", "TunnelPathSet", "validate", "validatePath", "enumerateSrlgs", "numberSrlgs",
    "DefaultEpsilon"]

DefaultEpsilon = 0.01


class InstanceError(LookupError):
    """!Unknown node, link, tunnel, path or SRLG id
    """
    pass


class InvalidParameterError(ValueError):
    """!A parameter is outside its documented range
    """
    pass


class Violation(namedtuple("Violation", "kind subject message")):
    """!One broken invariant found by validate

    - kind: short machine-readable tag, e.g. "nonpositive demand"
    - subject: id of the offending object (or None for instance-wide problems)
    - message: human readable explanation
    """
    __slots__ = ()

    def __str__(self):
        return "%s: %s" % (self.kind, self.message)


class Link(namedtuple("Link", "id a b capacity cost")):
    """!An undirected link

    - capacity: bandwidth capacity b_e; float("inf") if unbounded
    - cost: unit cost c_e of reserved bandwidth
    """
    __slots__ = ()

    @property
    def endpoints(self):
        return frozenset((self.a, self.b))

    def otherEnd(self, node):
        """!Return the endpoint of this link that is not node

        @throw InstanceError if node is not an endpoint
        """
        if node == self.a:
            return self.b
        if node == self.b:
            return self.a
        raise InstanceError("node %r is not an endpoint of link %r" % (node, self.id))


class Tunnel(namedtuple("Tunnel", "id source dest demand protected")):
    """!A source-destination traffic aggregate load balanced over candidate paths
    """
    __slots__ = ()


class Path(namedtuple("Path", "id tunnelId links cost")):
    """!A candidate path: an ordered tuple of link ids plus its routing cost c_p
    """
    __slots__ = ()

    @property
    def hopCount(self):
        return len(self.links)

    @property
    def linkSet(self):
        return frozenset(self.links)


class Srlg(namedtuple("Srlg", "id links")):
    """!A shared risk link group: links (a sorted tuple of link ids) that fail together
    """
    __slots__ = ()

    @property
    def linkSet(self):
        return frozenset(self.links)


class NetworkInstance(object):
    """!A network: graph, link capacities and costs, tunnels and SRLGs

    Construction does not check invariants; call validate for that.
    """
    def __init__(self, nodes, links, tunnels=(), srlgs=(), epsilon=DefaultEpsilon):
        """!Construct a NetworkInstance

        @param[in] nodes  collection of node ids
        @param[in] links  collection of Link
        @param[in] tunnels  collection of Tunnel
        @param[in] srlgs  collection of Srlg
        @param[in] epsilon  minimum share of every protected tunnel that must avoid each SRLG
        """
        self.nodes = tuple(sorted(set(nodes), key=str))
        self.links = tuple(links)
        self.tunnels = tuple(tunnels)
        self.srlgs = tuple(srlgs)
        self.epsilon = float(epsilon)

        self._linkDict = dict((link.id, link) for link in self.links)
        self._tunnelDict = dict((tunnel.id, tunnel) for tunnel in self.tunnels)
        self._srlgDict = dict((srlg.id, srlg) for srlg in self.srlgs)
        self._srlgIndexDict = dict((srlg.id, ind) for ind, srlg in enumerate(self.srlgs))
        self._pairDict = dict()
        for link in self.links:
            self._pairDict.setdefault(link.endpoints, link)

    def getLink(self, linkId):
        try:
            return self._linkDict[linkId]
        except KeyError:
            raise InstanceError("unknown link %r" % (linkId,))

    def getTunnel(self, tunnelId):
        try:
            return self._tunnelDict[tunnelId]
        except KeyError:
            raise InstanceError("unknown tunnel %r" % (tunnelId,))

    def getSrlg(self, srlgId):
        try:
            return self._srlgDict[srlgId]
        except KeyError:
            raise InstanceError("unknown SRLG %r" % (srlgId,))

    def srlgIndex(self, srlgId):
        """!Position of an SRLG in self.srlgs (its enumeration order)
        """
        try:
            return self._srlgIndexDict[srlgId]
        except KeyError:
            raise InstanceError("unknown SRLG %r" % (srlgId,))

    def linkBetween(self, a, b):
        """!Return the link joining nodes a and b, or None
        """
        return self._pairDict.get(frozenset((a, b)))

    @property
    def linkIds(self):
        return tuple(link.id for link in self.links)

    @property
    def protectedTunnels(self):
        return tuple(tunnel for tunnel in self.tunnels if tunnel.protected)

    @property
    def unprotectedTunnels(self):
        return tuple(tunnel for tunnel in self.tunnels if not tunnel.protected)

    def withTunnels(self, tunnels):
        return NetworkInstance(self.nodes, self.links, tunnels, self.srlgs, self.epsilon)

    def withSrlgs(self, srlgs):
        return NetworkInstance(self.nodes, self.links, self.tunnels, srlgs, self.epsilon)

    def withEpsilon(self, epsilon):
        return NetworkInstance(self.nodes, self.links, self.tunnels, self.srlgs, epsilon)

    def _key(self):
        return (self.nodes, self.links, self.tunnels, self.srlgs, self.epsilon)

    def __eq__(self, other):
        if not isinstance(other, NetworkInstance):
            return NotImplemented
        return self._key() == other._key()

    def __ne__(self, other):
        return not (self == other)

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return "%s(|V|=%s, |E|=%s, |K|=%s, |S|=%s)" % \
            (type(self).__name__, len(self.nodes), len(self.links), len(self.tunnels), len(self.srlgs))


def validate(instance):
    """!Check the invariants of an instance

    @param[in] instance  a NetworkInstance
    @return a list of Violation; empty if the instance is well formed
    """
    violations = []
    nodeSet = set(instance.nodes)

    if not (0 <= instance.epsilon < 1):
        violations.append(Violation("epsilon out of range", None,
            "epsilon=%r must be in [0, 1)" % (instance.epsilon,)))

    seenLinkIds = set()
    seenPairs = dict()
    for link in instance.links:
        if link.id in seenLinkIds:
            violations.append(Violation("duplicate link id", link.id, "link id %r used twice" % (link.id,)))
        seenLinkIds.add(link.id)
        for node in (link.a, link.b):
            if node not in nodeSet:
                violations.append(Violation("unknown endpoint", link.id,
                    "link %r endpoint %r is not a declared node" % (link.id, node)))
        if link.a == link.b:
            violations.append(Violation("self loop", link.id, "link %r joins %r to itself" % (link.id, link.a)))
        elif link.endpoints in seenPairs:
            violations.append(Violation("parallel link", link.id,
                "link %r duplicates link %r" % (link.id, seenPairs[link.endpoints])))
        else:
            seenPairs[link.endpoints] = link.id
        if not link.capacity >= 0:
            violations.append(Violation("negative capacity", link.id,
                "link %r capacity=%r" % (link.id, link.capacity)))
        if not link.cost >= 0:
            violations.append(Violation("negative cost", link.id, "link %r cost=%r" % (link.id, link.cost)))

    seenTunnelIds = set()
    for tunnel in instance.tunnels:
        if tunnel.id in seenTunnelIds:
            violations.append(Violation("duplicate tunnel id", tunnel.id, "tunnel id %r used twice" % (tunnel.id,)))
        seenTunnelIds.add(tunnel.id)
        if not tunnel.demand > 0:
            violations.append(Violation("nonpositive demand", tunnel.id,
                "tunnel %r demand=%r" % (tunnel.id, tunnel.demand)))
        if tunnel.source == tunnel.dest:
            violations.append(Violation("source is destination", tunnel.id,
                "tunnel %r starts and ends at %r" % (tunnel.id, tunnel.source)))
        for node in (tunnel.source, tunnel.dest):
            if node not in nodeSet:
                violations.append(Violation("unknown endpoint", tunnel.id,
                    "tunnel %r endpoint %r is not a declared node" % (tunnel.id, node)))

    seenSrlgIds = set()
    for srlg in instance.srlgs:
        if srlg.id in seenSrlgIds:
            violations.append(Violation("duplicate srlg id", srlg.id, "SRLG id %r used twice" % (srlg.id,)))
        seenSrlgIds.add(srlg.id)
        if not srlg.links:
            violations.append(Violation("empty srlg", srlg.id, "SRLG %r has no links" % (srlg.id,)))
        unknownIds = [linkId for linkId in srlg.links if linkId not in seenLinkIds]
        if unknownIds:
            violations.append(Violation("unknown srlg link", srlg.id,
                "SRLG %r references unknown links %s" % (srlg.id, ", ".join(repr(u) for u in unknownIds))))
    return violations


def validatePath(instance, path):
    """!Check that a path is a loop-free link sequence joining its tunnel's endpoints

    @return a list of Violation; empty if the path is well formed
    """
    violations = []
    tunnel = instance.getTunnel(path.tunnelId)
    if not path.links:
        return [Violation("empty path", path.id, "path %r has no links" % (path.id,))]
    if len(set(path.links)) != len(path.links):
        violations.append(Violation("repeated link", path.id, "path %r repeats a link" % (path.id,)))
    node = tunnel.source
    visited = set([node])
    for linkId in path.links:
        link = instance.getLink(linkId)
        if node not in link.endpoints:
            violations.append(Violation("disconnected path", path.id,
                "path %r: link %r does not touch node %r" % (path.id, linkId, node)))
            return violations
        node = link.otherEnd(node)
        if node in visited:
            violations.append(Violation("loop", path.id, "path %r revisits node %r" % (path.id, node)))
        visited.add(node)
    if node != tunnel.dest:
        violations.append(Violation("wrong destination", path.id,
            "path %r ends at %r, not %r" % (path.id, node, tunnel.dest)))
    return violations


def enumerateSrlgs(instance, q):
    """!Return every set of q links as an SRLG (q-link protection)

    SRLGs are listed in lexicographic order of their sorted link ids and numbered in that order.

    @param[in] instance  a NetworkInstance
    @param[in] q  number of links failing together; 1 <= q <= |E|
    @return a list of Srlg, of length binomial(|E|, q)

    @throw InvalidParameterError if q is out of range
    """
    linkIds = sorted(instance.linkIds, key=str)
    if not 1 <= q <= len(linkIds):
        raise InvalidParameterError("q=%r must be in [1, %d]" % (q, len(linkIds)))
    return numberSrlgs(itertools.combinations(linkIds, q))


def numberSrlgs(linkSets):
    """!Make SRLGs from link-id collections, naming them S0, S1... in the given order

    Ids are zero padded so that string order matches enumeration order.
    """
    linkSets = [tuple(sorted(linkSet, key=str)) for linkSet in linkSets]
    numDigits = len(str(max(len(linkSets) - 1, 0)))
    return [Srlg("S%0*d" % (numDigits, ind), links) for ind, links in enumerate(linkSets)]


class TunnelPathSet(object):
    """!The candidate paths of every tunnel, with SRLG and link incidence queries
    """
    def __init__(self, instance, pathDict):
        """!Construct a TunnelPathSet

        @param[in] instance  the NetworkInstance the paths belong to (its SRLGs define incidence)
        @param[in] pathDict  dict of tunnel id: sequence of Path

        @throw InstanceError if a tunnel or link is unknown or a path is malformed
        """
        self.instance = instance
        self._pathDict = dict()
        self._pathById = dict()
        for tunnelId, paths in pathDict.items():
            instance.getTunnel(tunnelId)
            paths = tuple(paths)
            for path in paths:
                if path.tunnelId != tunnelId:
                    raise InstanceError("path %r belongs to tunnel %r, not %r" % (path.id, path.tunnelId, tunnelId))
                violations = validatePath(instance, path)
                if violations:
                    raise InstanceError("; ".join(str(v) for v in violations))
                if path.id in self._pathById:
                    raise InstanceError("duplicate path id %r" % (path.id,))
                self._pathById[path.id] = path
            self._pathDict[tunnelId] = paths

        # link id: indices of SRLGs containing it
        self._linkSrlgDict = dict()
        for ind, srlg in enumerate(instance.srlgs):
            for linkId in srlg.links:
                self._linkSrlgDict.setdefault(linkId, set()).add(ind)
        self._pathSrlgDict = dict()
        for path in self._pathById.values():
            srlgInds = set()
            for linkId in path.links:
                srlgInds |= self._linkSrlgDict.get(linkId, set())
            self._pathSrlgDict[path.id] = frozenset(srlgInds)

    def rebind(self, instance):
        """!Return the same paths bound to another instance (e.g. with different SRLGs)
        """
        return TunnelPathSet(instance, self._pathDict)

    @property
    def tunnelIds(self):
        return tuple(tunnel.id for tunnel in self.instance.tunnels if tunnel.id in self._pathDict)

    def hasTunnel(self, tunnelId):
        return tunnelId in self._pathDict

    def paths(self, tunnelId):
        """!Candidate paths of a tunnel, in generation order
        """
        try:
            return self._pathDict[tunnelId]
        except KeyError:
            raise InstanceError("no paths for tunnel %r" % (tunnelId,))

    def getPath(self, pathId):
        try:
            return self._pathById[pathId]
        except KeyError:
            raise InstanceError("unknown path %r" % (pathId,))

    def pathSrlgIndices(self, pathId):
        """!Indices (into instance.srlgs) of the SRLGs a path intersects
        """
        self.getPath(pathId)
        return self._pathSrlgDict[pathId]

    def pathSrlgIds(self, pathId):
        srlgs = self.instance.srlgs
        return frozenset(srlgs[ind].id for ind in self.pathSrlgIndices(pathId))

    def pathsIntersecting(self, tunnelId, srlgId):
        """!Paths of a tunnel containing at least one link of an SRLG (P^k_S)

        @return a frozenset of path ids
        @throw InstanceError if the tunnel or SRLG is unknown
        """
        srlgInd = self.instance.srlgIndex(srlgId)
        return frozenset(path.id for path in self.paths(tunnelId) if srlgInd in self._pathSrlgDict[path.id])

    def pathsThroughEdge(self, tunnelId, linkId):
        """!Paths of a tunnel containing a link (P^k_e)

        @return a frozenset of path ids
        @throw InstanceError if the tunnel or link is unknown
        """
        self.instance.getLink(linkId)
        return frozenset(path.id for path in self.paths(tunnelId) if linkId in path.links)

    def disjointnessObjective(self, tunnelId):
        """!Maximum over SRLGs of the number of this tunnel's paths intersecting it
        """
        counts = dict()
        for path in self.paths(tunnelId):
            for ind in self._pathSrlgDict[path.id]:
                counts[ind] = counts.get(ind, 0) + 1
        return max(counts.values()) if counts else 0

    def __eq__(self, other):
        if not isinstance(other, TunnelPathSet):
            return NotImplemented
        return self._pathDict == other._pathDict

    def __ne__(self, other):
        return not (self == other)

    def __repr__(self):
        return "%s(tunnels=%d, paths=%d)" % (type(self).__name__, len(self._pathDict), len(self._pathById))
