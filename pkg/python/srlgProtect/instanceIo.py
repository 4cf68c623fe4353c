"""!Reading and writing instances, paths, splits, surrogates and solutions

Topologies come from the SNDLIB native text format (NODES, LINKS and DEMANDS sections only)
or from GraphML (Internet Topology Zoo). Instances and solutions are exchanged as JSON:

Instance: {"nodes": [...], "links": [{"id", "a", "b", "capacity", "cost"}],
    "tunnels": [{"id", "src", "dst", "demand", "protected"}], "srlgs": [[linkId, ...]], "epsilon"}
    (an unbounded capacity is written as null)
Solution: {"splits": {tunnelId: {pathId: ratio}}, "reservations": {linkId: value},
    "objective": {"reservation_cost", "routing_cost"}, "stats": {"iterations", "cuts", "wall_ms"},
    "feasible": bool, ...}
"""
import json
import math

from lxml import etree
import numpy as np
import pyparsing as pp

from .instance import InvalidParameterError, Link, NetworkInstance, Path, Tunnel, TunnelPathSet, numberSrlgs
from .log import log

__all__ = ["InstanceIoError", "SndlibParseError", "GraphmlParseError", "DemandGenSpec", "GraphmlDefaults",
    "parseSndlib", "parseGraphml", "generateDemands", "assignProtection",
    "writeInstance", "readInstance", "writePathSets", "readPathSets", "writeSplits", "readSplits",
    "writeSurrogate", "readSurrogate", "writeSolution", "readSolution", "loadText", "saveText"]


class InstanceIoError(Exception):
    """!Reading or writing an instance file failed
    """
    def __init__(self, msg, lineNum=None):
        self.lineNum = lineNum
        if lineNum is not None:
            msg = "line %s: %s" % (lineNum, msg)
        Exception.__init__(self, msg)


class SndlibParseError(InstanceIoError):
    pass


class GraphmlParseError(InstanceIoError):
    pass


def loadText(filePath):
    """!Return the contents of a text file

    @throw InstanceIoError naming the path if the file cannot be read
    """
    try:
        with open(filePath, "r") as f:
            return f.read()
    except (IOError, OSError) as e:
        raise InstanceIoError("could not read %r: %s" % (filePath, e))


def saveText(filePath, text):
    """!Write text to a file

    @throw InstanceIoError naming the path if the file cannot be written
    """
    try:
        with open(filePath, "w") as f:
            f.write(text)
    except (IOError, OSError) as e:
        raise InstanceIoError("could not write %r: %s" % (filePath, e))


class _SndlibItems(object):
    """!pyparsing elements for SNDLIB native entries
    """
    @property
    def ident(self):
        return pp.Word(pp.alphanums + "_.-:/+")

    @property
    def number(self):
        point = pp.Literal(".")
        e = pp.CaselessLiteral("E")
        ppFloat = pp.Combine(pp.Word("+-" + pp.nums, pp.nums) +
            pp.Optional(point + pp.Optional(pp.Word(pp.nums))) +
            pp.Optional(e + pp.Word("+-" + pp.nums, pp.nums)))
        ppFloat.setParseAction(lambda t: float(t[0]))
        return ppFloat

    @property
    def lpar(self):
        return pp.Suppress("(")

    @property
    def rpar(self):
        return pp.Suppress(")")

    @property
    def sectionHeader(self):
        return pp.Word(pp.alphas.upper() + "_").setResultsName("name") + pp.Suppress("(") + pp.StringEnd()

    @property
    def node(self):
        return self.ident.setResultsName("id") \
            + pp.Optional(self.lpar + self.number + self.number + self.rpar)

    @property
    def link(self):
        module = pp.Group(self.number + self.number)
        return self.ident.setResultsName("id") \
            + self.lpar + self.ident.setResultsName("a") + self.ident.setResultsName("b") + self.rpar \
            + self.number.setResultsName("installedCapacity") \
            + self.number.setResultsName("installedCost") \
            + self.number.setResultsName("routingCost") \
            + self.number.setResultsName("setupCost") \
            + self.lpar + pp.Group(pp.ZeroOrMore(module)).setResultsName("modules") + self.rpar

    @property
    def demand(self):
        return self.ident.setResultsName("id") \
            + self.lpar + self.ident.setResultsName("src") + self.ident.setResultsName("dst") + self.rpar \
            + self.number.setResultsName("routingUnit") \
            + self.number.setResultsName("value") \
            + pp.Optional(self.number ^ pp.Literal("UNLIMITED"))

_sndlibItems = _SndlibItems()


class SndlibParser(object):
    """!Parse the NODES, LINKS and DEMANDS sections of an SNDLIB native file

    Other sections (META, ADMISSIBLE_PATHS...) are skipped.
    """
    RequiredSections = ("NODES", "LINKS", "DEMANDS")

    def __init__(self):
        self.headerGrammar = _sndlibItems.sectionHeader
        self.entryGrammarDict = dict(
            NODES = _sndlibItems.node + pp.StringEnd(),
            LINKS = _sndlibItems.link + pp.StringEnd(),
            DEMANDS = _sndlibItems.demand + pp.StringEnd(),
        )

    def splitSections(self, text):
        """!Split text into sections

        @return dict of section name: list of (line number, entry text)
        @throw SndlibParseError on a malformed header or an unterminated section
        """
        sectionDict = dict()
        currName = None
        currStart = None
        depth = 0
        for lineNum, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line or line.startswith("?"):
                continue
            if currName is None:
                try:
                    ppOut = self.headerGrammar.parseString(line, parseAll=True)
                except pp.ParseException:
                    raise SndlibParseError("malformed section header %r" % (line,), lineNum)
                currName = ppOut.name
                currStart = lineNum
                if currName in sectionDict:
                    raise SndlibParseError("section %s repeated" % (currName,), lineNum)
                sectionDict[currName] = []
                depth = 1
                continue
            # entries of unsupported sections (ADMISSIBLE_PATHS) may span lines
            depth += line.count("(") - line.count(")")
            if depth == 0 and line == ")":
                currName = None
            elif depth <= 0:
                raise SndlibParseError("unbalanced parentheses in section %s" % (currName,), lineNum)
            else:
                sectionDict[currName].append((lineNum, line))
        if currName is not None:
            raise SndlibParseError("section %s is not closed" % (currName,), currStart)
        return sectionDict

    def parseEntry(self, sectionName, lineNum, entry):
        try:
            return self.entryGrammarDict[sectionName].parseString(entry, parseAll=True)
        except pp.ParseException as e:
            raise SndlibParseError("bad %s entry %r: %s" % (sectionName, entry, e.msg), lineNum)

    def parse(self, text, epsilon=None):
        """!Parse SNDLIB native text

        @param[in] text  file contents
        @param[in] epsilon  epsilon of the new instance; None for the default
        @return a NetworkInstance with unprotected tunnels and no SRLGs
        """
        sectionDict = self.splitSections(text)
        for name in self.RequiredSections:
            if name not in sectionDict:
                raise SndlibParseError("missing %s section" % (name,))

        nodes = []
        for lineNum, entry in sectionDict["NODES"]:
            nodes.append(self.parseEntry("NODES", lineNum, entry).id)
        nodeSet = set(nodes)

        linkList = []
        pairIndexDict = dict()
        for lineNum, entry in sectionDict["LINKS"]:
            ppOut = self.parseEntry("LINKS", lineNum, entry)
            for node in (ppOut.a, ppOut.b):
                if node not in nodeSet:
                    raise SndlibParseError("link %s references unknown node %s" % (ppOut.id, node), lineNum)
            modules = [tuple(module) for module in ppOut.modules]
            capacity = self.linkCapacity(ppOut.installedCapacity, modules)
            cost = self.linkCost(ppOut.routingCost, modules)
            pair = frozenset((ppOut.a, ppOut.b))
            if pair in pairIndexDict:
                ind = pairIndexDict[pair]
                prevLink = linkList[ind]
                log.warn("SNDLIB link %s parallels link %s; capacities merged" % (ppOut.id, prevLink.id))
                linkList[ind] = prevLink._replace(capacity=prevLink.capacity + capacity)
                continue
            pairIndexDict[pair] = len(linkList)
            linkList.append(Link(ppOut.id, ppOut.a, ppOut.b, capacity, cost))

        tunnels = []
        for lineNum, entry in sectionDict["DEMANDS"]:
            ppOut = self.parseEntry("DEMANDS", lineNum, entry)
            for node in (ppOut.src, ppOut.dst):
                if node not in nodeSet:
                    raise SndlibParseError("demand %s references unknown node %s" % (ppOut.id, node), lineNum)
            tunnels.append(Tunnel(ppOut.id, ppOut.src, ppOut.dst, float(ppOut.value), False))

        log.info("parsed SNDLIB instance: %d nodes, %d links, %d demands" % (len(nodes), len(linkList), len(tunnels)))
        kwargs = dict() if epsilon is None else dict(epsilon=epsilon)
        return NetworkInstance(nodes, linkList, tunnels, **kwargs)

    @staticmethod
    def linkCapacity(installedCapacity, modules):
        """!Pre-installed capacity if positive, else the largest module capacity, else unbounded
        """
        if installedCapacity > 0:
            return float(installedCapacity)
        if modules:
            return float(max(capacity for capacity, _ in modules))
        return float("inf")

    @staticmethod
    def linkCost(routingCost, modules):
        """!Routing cost if positive, else cost per unit of the first module, else 1
        """
        if routingCost > 0:
            return float(routingCost)
        for capacity, cost in modules:
            if capacity > 0:
                return float(cost) / float(capacity)
        return 1.0


def parseSndlib(text, epsilon=None):
    """!Parse SNDLIB native text into a NetworkInstance (tunnels from DEMANDS, no SRLGs)

    @throw SndlibParseError (with line number when known) if the text is malformed
    """
    return SndlibParser().parse(text, epsilon=epsilon)


class GraphmlDefaults(object):
    """!Link attributes used when a GraphML edge does not carry them
    """
    def __init__(self, capacity=10000.0, cost=1.0):
        """!Construct GraphmlDefaults

        @param[in] capacity  default link capacity (bandwidth units, e.g. Mbps)
        @param[in] cost  default unit reservation cost
        """
        self.capacity = float(capacity)
        self.cost = float(cost)


def _localName(element):
    return etree.QName(element).localname


def parseGraphml(text, defaults=None, epsilon=None):
    """!Parse GraphML text into a NetworkInstance (links only)

    Edges are undirected; self-loops are skipped and parallel edges merged.
    Capacity comes from edge data "capacity", else "LinkSpeedRaw" (bit/s, converted to Mbit/s),
    else the default; cost from "cost" or "weight", else the default.

    @param[in] text  GraphML document
    @param[in] defaults  GraphmlDefaults; None for the defaults
    @param[in] epsilon  epsilon of the new instance; None for the default

    @throw GraphmlParseError on malformed XML or an edge referencing an unknown node
    """
    defaults = defaults or GraphmlDefaults()
    if isinstance(text, str):
        text = text.encode("utf-8")
    try:
        root = etree.fromstring(text)
    except etree.XMLSyntaxError as e:
        raise GraphmlParseError("malformed XML: %s" % (e,), e.lineno)

    keyNameDict = dict()
    for element in root.iter(etree.Element):
        if _localName(element) == "key" and element.get("for", "all") in ("edge", "all"):
            keyNameDict[element.get("id")] = element.get("attr.name", element.get("id"))

    graphs = [element for element in root.iter(etree.Element) if _localName(element) == "graph"]
    if not graphs:
        raise GraphmlParseError("no graph element")
    graph = graphs[0]

    nodes = [element.get("id") for element in graph if _localName(element) == "node"]
    nodeSet = set(nodes)
    edgeElements = [element for element in graph if _localName(element) == "edge"]
    numDigits = len(str(max(len(edgeElements) - 1, 0)))

    linkList = []
    pairIndexDict = dict()
    for ind, element in enumerate(edgeElements):
        a = element.get("source")
        b = element.get("target")
        for node in (a, b):
            if node not in nodeSet:
                raise GraphmlParseError("edge references unknown node %r" % (node,), element.sourceline)
        if a == b:
            log.warn("GraphML self-loop at node %r skipped" % (a,))
            continue
        dataDict = dict()
        for data in element:
            if _localName(data) == "data":
                dataDict[keyNameDict.get(data.get("key"), data.get("key"))] = (data.text or "").strip()
        try:
            capacity, cost = _graphmlLinkAttrs(dataDict, defaults)
        except ValueError as e:
            raise GraphmlParseError("bad edge attribute: %s" % (e,), element.sourceline)
        linkId = element.get("id") or "L%0*d" % (numDigits, ind)
        pair = frozenset((a, b))
        if pair in pairIndexDict:
            prevInd = pairIndexDict[pair]
            prevLink = linkList[prevInd]
            log.warn("GraphML edge %s parallels link %s; capacities merged" % (linkId, prevLink.id))
            linkList[prevInd] = prevLink._replace(capacity=prevLink.capacity + capacity)
            continue
        pairIndexDict[pair] = len(linkList)
        linkList.append(Link(linkId, a, b, capacity, cost))

    log.info("parsed GraphML topology: %d nodes, %d links" % (len(nodes), len(linkList)))
    kwargs = dict() if epsilon is None else dict(epsilon=epsilon)
    return NetworkInstance(nodes, linkList, **kwargs)


def _graphmlLinkAttrs(dataDict, defaults):
    if dataDict.get("capacity"):
        capacity = float(dataDict["capacity"])
    elif dataDict.get("LinkSpeedRaw"):
        capacity = float(dataDict["LinkSpeedRaw"]) / 1.0e6
    else:
        capacity = defaults.capacity
    if dataDict.get("cost"):
        cost = float(dataDict["cost"])
    elif dataDict.get("weight"):
        cost = float(dataDict["weight"])
    else:
        cost = defaults.cost
    return capacity, cost


class DemandGenSpec(object):
    """!How to generate random tunnels on a topology
    """
    def __init__(self, tunnelCount, demandRange=(1.0, 100.0), protectedFraction=0.4, seed=0):
        """!Construct a DemandGenSpec

        @param[in] tunnelCount  number of tunnels (the experiments use 10, 40 and 80)
        @param[in] demandRange  (lo, hi): demands are uniform in [lo, hi]
        @param[in] protectedFraction  fraction of tunnels to protect, in [0, 1]
        @param[in] seed  random seed

        @throw InvalidParameterError if a parameter is out of range
        """
        self.tunnelCount = int(tunnelCount)
        self.demandRange = (float(demandRange[0]), float(demandRange[1]))
        self.protectedFraction = float(protectedFraction)
        self.seed = int(seed)
        if self.tunnelCount < 1:
            raise InvalidParameterError("tunnelCount=%r must be >= 1" % (tunnelCount,))
        if not 0 < self.demandRange[0] <= self.demandRange[1]:
            raise InvalidParameterError("demandRange=%r must satisfy 0 < lo <= hi" % (demandRange,))
        if not 0 <= self.protectedFraction <= 1:
            raise InvalidParameterError("protectedFraction=%r must be in [0, 1]" % (protectedFraction,))

    def __repr__(self):
        return "%s(tunnelCount=%s, demandRange=%s, protectedFraction=%s, seed=%s)" % \
            (type(self).__name__, self.tunnelCount, self.demandRange, self.protectedFraction, self.seed)


def _numProtected(fraction, count):
    return int(math.ceil(fraction * count - 1e-9))


def generateDemands(instance, spec):
    """!Replace the tunnels of an instance by random ones

    Source-destination pairs are distinct and drawn uniformly without self-loops,
    demands are uniform in spec.demandRange and ceil(fraction * count) random tunnels are protected.
    The result depends only on (instance, spec).

    @throw InvalidParameterError if there are too few node pairs
    """
    nodes = instance.nodes
    pairs = [(s, t) for s in nodes for t in nodes if s != t]
    if spec.tunnelCount > len(pairs):
        raise InvalidParameterError("tunnelCount=%d exceeds the %d distinct node pairs" %
            (spec.tunnelCount, len(pairs)))
    rng = np.random.default_rng(spec.seed)
    pairInds = rng.choice(len(pairs), size=spec.tunnelCount, replace=False)
    demands = rng.uniform(spec.demandRange[0], spec.demandRange[1], size=spec.tunnelCount)
    protectedInds = set(rng.choice(spec.tunnelCount,
        size=_numProtected(spec.protectedFraction, spec.tunnelCount), replace=False).tolist())
    numDigits = len(str(spec.tunnelCount - 1))
    tunnels = []
    for ind, (pairInd, demand) in enumerate(zip(pairInds, demands)):
        source, dest = pairs[int(pairInd)]
        tunnels.append(Tunnel("T%0*d" % (numDigits, ind), source, dest, float(demand), ind in protectedInds))
    return instance.withTunnels(tunnels)


def assignProtection(instance, fraction, seed=0):
    """!Protect ceil(fraction * |K|) randomly chosen existing tunnels (and unprotect the rest)

    @throw InvalidParameterError if fraction is not in [0, 1]
    """
    if not 0 <= fraction <= 1:
        raise InvalidParameterError("fraction=%r must be in [0, 1]" % (fraction,))
    count = len(instance.tunnels)
    rng = np.random.default_rng(seed)
    protectedInds = set(rng.choice(count, size=_numProtected(fraction, count), replace=False).tolist()) \
        if count else set()
    return instance.withTunnels([tunnel._replace(protected=ind in protectedInds)
        for ind, tunnel in enumerate(instance.tunnels)])


def _capacityToJson(capacity):
    return None if math.isinf(capacity) else capacity


def _capacityFromJson(value):
    return float("inf") if value is None else float(value)


def writeInstance(instance):
    """!Return the JSON text of an instance
    """
    return json.dumps(dict(
        nodes = list(instance.nodes),
        links = [dict(id=link.id, a=link.a, b=link.b, capacity=_capacityToJson(link.capacity), cost=link.cost)
            for link in instance.links],
        tunnels = [dict(id=tunnel.id, src=tunnel.source, dst=tunnel.dest, demand=tunnel.demand,
            protected=tunnel.protected) for tunnel in instance.tunnels],
        srlgs = [list(srlg.links) for srlg in instance.srlgs],
        epsilon = instance.epsilon,
    ), indent=1)


def readInstance(text):
    """!Parse instance JSON (see module doc); SRLGs are numbered in file order

    @throw InstanceIoError if a field is missing or has the wrong type
    """
    try:
        data = json.loads(text)
        links = [Link(item["id"], item["a"], item["b"], _capacityFromJson(item["capacity"]), float(item["cost"]))
            for item in data["links"]]
        tunnels = [Tunnel(item["id"], item["src"], item["dst"], float(item["demand"]), bool(item["protected"]))
            for item in data.get("tunnels", [])]
        srlgs = numberSrlgs(data.get("srlgs", []))
        kwargs = dict(epsilon=float(data["epsilon"])) if "epsilon" in data else dict()
        return NetworkInstance(data["nodes"], links, tunnels, srlgs, **kwargs)
    except (ValueError, KeyError, TypeError) as e:
        raise InstanceIoError("bad instance JSON: %s" % (e,))


def writePathSets(pathSet):
    """!Return the JSON text of a TunnelPathSet: {"tunnels": {tunnelId: [{"id", "links", "cost"}]}}
    """
    return json.dumps(dict(tunnels=dict(
        (tunnelId, [dict(id=path.id, links=list(path.links), cost=path.cost) for path in pathSet.paths(tunnelId)])
        for tunnelId in pathSet.tunnelIds
    )), indent=1)


def readPathSets(text, instance):
    """!Parse path JSON and bind the paths to an instance
    """
    try:
        data = json.loads(text)
        pathDict = dict()
        for tunnelId, items in data["tunnels"].items():
            pathDict[tunnelId] = [Path(item["id"], tunnelId, tuple(item["links"]), float(item["cost"]))
                for item in items]
    except (ValueError, KeyError, TypeError) as e:
        raise InstanceIoError("bad path JSON: %s" % (e,))
    return TunnelPathSet(instance, pathDict)


def writeSplits(splits):
    """!Return the JSON text of split ratios {tunnelId: {pathId: ratio}}
    """
    return json.dumps(dict((tunnelId, dict(ratios)) for tunnelId, ratios in splits.items()), indent=1)


def readSplits(text):
    try:
        data = json.loads(text)
        return dict((tunnelId, dict((pathId, float(ratio)) for pathId, ratio in ratios.items()))
            for tunnelId, ratios in data.items())
    except (ValueError, AttributeError, TypeError) as e:
        raise InstanceIoError("bad splits JSON: %s" % (e,))


def writeSurrogate(surrogate):
    """!Return the JSON text of a ConvexSurrogate: {"neurons": [{"kind", "ax", "ay", "bi", "ai"}], "bias"}
    """
    return json.dumps(surrogate.toDict(), indent=1)


def readSurrogate(text):
    from .surrogate import ConvexSurrogate
    try:
        return ConvexSurrogate.fromDict(json.loads(text))
    except (ValueError, KeyError, TypeError) as e:
        raise InstanceIoError("bad surrogate JSON: %s" % (e,))


def writeSolution(report):
    """!Return the JSON text of a SolveReport (full precision)
    """
    return json.dumps(report.toDict(), indent=1)


def readSolution(text):
    """!Parse solution JSON into a dict with the fields listed in the module doc
    """
    try:
        data = json.loads(text)
        for key in ("splits", "reservations", "objective", "stats", "feasible"):
            data[key]
    except (ValueError, KeyError, TypeError) as e:
        raise InstanceIoError("bad solution JSON: %s" % (e,))
    return data
