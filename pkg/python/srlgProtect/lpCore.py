"""!Linear programs and a bounded-variable primal simplex

A LinearProgram minimizes c.x over variables with finite lower and possibly infinite upper bounds,
subject to sparse rows a.x {<=, =, >=} b. Rows may be appended after a solve (cutting planes) and the
next solve may start from the previous optimal basis.

SimplexSolver is the built-in solver: a revised primal simplex with bound flipping, a sparse LU
of the basis (scipy.sparse.linalg.splu) refreshed every few pivots, and product-form updates in
between. Phase 1 minimizes the sum of artificial variables, added only for rows violated by the
starting point. Pricing is Dantzig's rule with the smallest index on ties, falling back to Bland's
rule after a run of degenerate pivots.

ScipyLpSolver solves the same LinearProgram with scipy.optimize.linprog (HiGHS).
"""
from collections import namedtuple
import math

import numpy as np
from scipy import optimize, sparse
from scipy.sparse import linalg as sparseLinalg

from .log import log

__all__ = ["LpError", "Row", "LinearProgram", "LpSolution", "Basis", "SimplexSolver", "ScipyLpSolver",
    "solveLp", "checkFeasible", "writeLpFile", "Optimal", "Infeasible", "Unbounded", "IterationLimit"]

Optimal = "optimal"
Infeasible = "infeasible"
Unbounded = "unbounded"
IterationLimit = "iteration-limit"

FeasibilityTol = 1e-8
OptimalityTol = 1e-9


class LpError(Exception):
    """!A linear program is malformed (bad index, bound or sense)
    """
    pass


class Row(namedtuple("Row", "coeffs sense rhs name")):
    """!One constraint: sum of coef * x[ind] for (ind, coef) in coeffs, compared to rhs
    """
    __slots__ = ()

    def activity(self, values):
        return sum(coef * values[ind] for ind, coef in self.coeffs)


class LinearProgram(object):
    """!A minimization linear program with bounded variables and sparse rows
    """
    Senses = ("<=", "=", ">=")

    def __init__(self, name="lp"):
        self.name = name
        self.varNames = []
        self.lower = []
        self.upper = []
        self.cost = []
        self.rows = []

    @property
    def numVars(self):
        return len(self.varNames)

    @property
    def numRows(self):
        return len(self.rows)

    def addVariable(self, name=None, lower=0.0, upper=float("inf"), cost=0.0):
        """!Add a variable

        @param[in] name  variable name; defaults to "x<index>"
        @param[in] lower  lower bound (finite)
        @param[in] upper  upper bound (may be inf)
        @param[in] cost  objective coefficient
        @return the index of the new variable

        @throw LpError if the bounds are invalid
        """
        self._checkBounds(lower, upper)
        ind = len(self.varNames)
        self.varNames.append(name if name is not None else "x%d" % (ind,))
        self.lower.append(float(lower))
        self.upper.append(float(upper))
        self.cost.append(float(cost))
        return ind

    def setBounds(self, ind, lower, upper):
        self._checkIndex(ind)
        self._checkBounds(lower, upper)
        self.lower[ind] = float(lower)
        self.upper[ind] = float(upper)

    def setCost(self, ind, cost):
        self._checkIndex(ind)
        self.cost[ind] = float(cost)

    def addRow(self, coeffs, sense="<=", rhs=0.0, name=None):
        """!Append a row

        @param[in] coeffs  dict of variable index: coefficient, or an iterable of (index, coefficient);
            repeated indices are summed and zero coefficients dropped
        @param[in] sense  one of "<=", "=", ">="
        @param[in] rhs  right-hand side (finite)
        @param[in] name  row name; defaults to "r<index>"
        @return the index of the new row

        @throw LpError if an index is unknown, the sense is invalid or rhs is not finite
        """
        if sense not in self.Senses:
            raise LpError("invalid sense %r; must be one of %s" % (sense, self.Senses))
        if not math.isfinite(rhs):
            raise LpError("rhs=%r must be finite" % (rhs,))
        items = coeffs.items() if hasattr(coeffs, "items") else coeffs
        coeffDict = dict()
        for ind, coef in items:
            self._checkIndex(ind)
            if not math.isfinite(coef):
                raise LpError("coefficient %r of variable %s is not finite" % (coef, ind))
            coeffDict[ind] = coeffDict.get(ind, 0.0) + float(coef)
        ind = len(self.rows)
        self.rows.append(Row(
            coeffs = tuple(sorted((i, c) for i, c in coeffDict.items() if c != 0)),
            sense = sense,
            rhs = float(rhs),
            name = name if name is not None else "r%d" % (ind,),
        ))
        return ind

    def objectiveValue(self, values):
        return float(np.dot(self.cost, values))

    def copy(self):
        lp = LinearProgram(self.name)
        lp.varNames = list(self.varNames)
        lp.lower = list(self.lower)
        lp.upper = list(self.upper)
        lp.cost = list(self.cost)
        lp.rows = list(self.rows)
        return lp

    def matrix(self):
        """!Return the constraint matrix as a scipy.sparse csc_matrix (rows x variables)
        """
        rowInds = []
        colInds = []
        data = []
        for i, row in enumerate(self.rows):
            for j, coef in row.coeffs:
                rowInds.append(i)
                colInds.append(j)
                data.append(coef)
        return sparse.csc_matrix((data, (rowInds, colInds)), shape=(self.numRows, self.numVars))

    def _checkIndex(self, ind):
        if not 0 <= ind < len(self.varNames):
            raise LpError("unknown variable index %r" % (ind,))

    @staticmethod
    def _checkBounds(lower, upper):
        if not math.isfinite(lower):
            raise LpError("lower bound %r must be finite" % (lower,))
        if math.isnan(upper) or upper < lower:
            raise LpError("upper bound %r < lower bound %r" % (upper, lower))

    def __repr__(self):
        return "%s(%r, vars=%d, rows=%d)" % (type(self).__name__, self.name, self.numVars, self.numRows)


class Basis(namedtuple("Basis", "numVars numRows basic atUpper")):
    """!An optimal basis, for warm starting after rows are appended

    basic holds ("x", varIndex) or ("s", rowIndex) keys, one per row;
    atUpper holds the indices of nonbasic variables at their upper bound.
    """
    __slots__ = ()


class LpSolution(object):
    """!Result of solving a LinearProgram
    """
    def __init__(self, status, values=None, objective=None, iterations=0, message="", basis=None):
        self.status = status
        self.values = values
        self.objective = objective
        self.iterations = iterations
        self.message = message
        self.basis = basis

    @property
    def isOptimal(self):
        return self.status == Optimal

    def __repr__(self):
        return "%s(status=%r, objective=%s, iterations=%s)" % \
            (type(self).__name__, self.status, self.objective, self.iterations)


def checkFeasible(lp, values, tol=FeasibilityTol):
    """!Scan every row and bound of lp at values

    @return a list of (kind, index, excess) where kind is "row" or "bound" and excess is
        the amount by which the row or bound is violated beyond tol * (1 + |rhs|)
    """
    violations = []
    for j, (lower, upper) in enumerate(zip(lp.lower, lp.upper)):
        value = values[j]
        excess = max(lower - value - tol * (1 + abs(lower)),
            value - upper - tol * (1 + abs(upper)) if math.isfinite(upper) else -1.0)
        if excess > 0:
            violations.append(("bound", j, excess))
    for i, row in enumerate(lp.rows):
        activity = row.activity(values)
        slack = tol * (1 + abs(row.rhs))
        if row.sense == "<=":
            excess = activity - row.rhs - slack
        elif row.sense == ">=":
            excess = row.rhs - activity - slack
        else:
            excess = abs(activity - row.rhs) - slack
        if excess > 0:
            violations.append(("row", i, excess))
    return violations


class SimplexSolver(object):
    """!Built-in bounded-variable revised primal simplex
    """
    def __init__(self, maxIterations=None, optimalityTol=OptimalityTol, feasibilityTol=FeasibilityTol,
        pivotTol=1e-9, refactorEvery=64, blandAfter=50):
        """!Construct a SimplexSolver

        @param[in] maxIterations  pivot limit per solve; None for 1000 + 20 * (rows + variables)
        @param[in] optimalityTol  reduced cost tolerance
        @param[in] feasibilityTol  primal feasibility tolerance (scaled by 1 + |rhs|)
        @param[in] pivotTol  smallest pivot element accepted by the ratio test
        @param[in] refactorEvery  refactor the basis after this many product-form updates
        @param[in] blandAfter  switch to Bland's rule after this many consecutive degenerate pivots
        """
        self.maxIterations = maxIterations
        self.optimalityTol = optimalityTol
        self.feasibilityTol = feasibilityTol
        self.pivotTol = pivotTol
        self.refactorEvery = refactorEvery
        self.blandAfter = blandAfter

    def solve(self, lp, warmStart=None):
        """!Solve lp

        @param[in] lp  a LinearProgram
        @param[in] warmStart  a Basis from an earlier solve of lp before rows were appended, or None
        @return an LpSolution
        """
        if lp.numRows == 0:
            return _solveUnconstrained(lp)
        run = _SimplexRun(self, lp)
        solution = run.run(warmStart)
        if solution.isOptimal:
            violations = checkFeasible(lp, solution.values, tol=self.feasibilityTol)
            if violations:
                kind, ind, excess = max(violations, key=lambda v: v[2])
                msg = "numerical breakdown: %s %d violated by %.3g after solve" % (kind, ind, excess)
                log.warn("%s: %s" % (lp.name, msg))
                return LpSolution(IterationLimit, solution.values, solution.objective, solution.iterations, msg)
        return solution

    def __repr__(self):
        return "%s()" % (type(self).__name__,)


def _solveUnconstrained(lp):
    values = np.array(lp.lower, dtype=float)
    for j, cost in enumerate(lp.cost):
        if cost < 0:
            if not math.isfinite(lp.upper[j]):
                return LpSolution(Unbounded, message="variable %s decreases the objective without bound" %
                    (lp.varNames[j],))
            values[j] = lp.upper[j]
    return LpSolution(Optimal, values, lp.objectiveValue(values), basis=Basis(lp.numVars, 0, (), frozenset(
        j for j in range(lp.numVars) if values[j] != lp.lower[j])))


class _Restart(Exception):
    pass


class _SimplexRun(object):
    """!State of one simplex solve

    Columns are ordered: structural variables [0, n), row slacks [n, n + m), artificials [n + m, ...).
    Rows are normalized to "<=" or "=" (">=" rows are negated) so that every slack has bounds
    [0, inf) or [0, 0].
    """
    def __init__(self, config, lp):
        self.config = config
        self.lp = lp
        self.n = lp.numVars
        self.m = lp.numRows
        signs = np.array([-1.0 if row.sense == ">=" else 1.0 for row in lp.rows])
        self.A = sparse.csc_matrix(sparse.diags(signs) @ lp.matrix())
        self.b = signs * np.array([row.rhs for row in lp.rows])
        self.isEq = np.array([row.sense == "=" for row in lp.rows])
        self.maxIterations = config.maxIterations if config.maxIterations is not None \
            else 1000 + 20 * (self.m + self.n)
        self.iterations = 0

    def _reset(self, basicCols, upperCols, newRowStart):
        """!Set up columns, bounds and the starting basis; add artificials for violated new rows
        """
        n, m = self.n, self.m
        self.artRows = []
        self.artSigns = []
        self.lo = np.concatenate((np.array(self.lp.lower, dtype=float), np.zeros(m)))
        self.up = np.concatenate((np.array(self.lp.upper, dtype=float), np.where(self.isEq, 0.0, np.inf)))
        self.basis = np.array(basicCols, dtype=np.int64)
        self.isBasic = np.zeros(n + m, dtype=bool)
        self.isBasic[self.basis] = True
        self.x = self.lo.copy()
        for j in upperCols:
            if not self.isBasic[j] and math.isfinite(self.up[j]):
                self.x[j] = self.up[j]
        self._refactor()

        tol = self.config.feasibilityTol
        artInds = []
        for pos in range(m):
            col = self.basis[pos]
            value = self.x[col]
            if col < n or (col - n) < newRowStart:
                limit = 1e-6 * (1 + abs(self.b[col - n] if col >= n else 0.0))
                if value < self.lo[col] - limit or value > self.up[col] + limit:
                    raise _Restart()
                continue
            row = col - n
            scale = tol * (1 + abs(self.b[row]))
            if value < -scale or (self.isEq[row] and value > scale):
                artInds.append((pos, row, 1.0 if value > 0 else -1.0))
        if artInds:
            numArt = len(artInds)
            self.lo = np.concatenate((self.lo, np.zeros(numArt)))
            self.up = np.concatenate((self.up, np.full(numArt, np.inf)))
            self.x = np.concatenate((self.x, np.zeros(numArt)))
            self.isBasic = np.concatenate((self.isBasic, np.zeros(numArt, dtype=bool)))
            for k, (pos, row, sign) in enumerate(artInds):
                artCol = n + m + k
                slackCol = n + row
                self.artRows.append(row)
                self.artSigns.append(sign)
                self.basis[pos] = artCol
                self.isBasic[artCol] = True
                self.isBasic[slackCol] = False
                self.x[slackCol] = 0.0
            self.artRows = np.array(self.artRows, dtype=np.int64)
            self.artSigns = np.array(self.artSigns)
            self._refactor()
        else:
            self.artRows = np.zeros(0, dtype=np.int64)
            self.artSigns = np.zeros(0)
        self.numCols = n + m + len(self.artRows)

    def run(self, warmStart):
        n, m = self.n, self.m
        coldBasis = [n + i for i in range(m)]
        started = False
        if warmStart is not None and warmStart.numVars == n and warmStart.numRows <= m \
                and len(warmStart.basic) == warmStart.numRows:
            basicCols = [key[1] if key[0] == "x" else n + key[1] for key in warmStart.basic]
            basicCols += [n + i for i in range(warmStart.numRows, m)]
            try:
                self._reset(basicCols, warmStart.atUpper, warmStart.numRows)
                started = True
            except (_Restart, RuntimeError):
                log.debug("%s: warm start basis rejected; starting cold" % (self.lp.name,))
        if not started:
            try:
                self._reset(coldBasis, (), 0)
            except RuntimeError as e:
                return LpSolution(IterationLimit, message="could not factor the slack basis: %s" % (e,))

        try:
            if len(self.artRows):
                cost = np.zeros(self.numCols)
                cost[n + m:] = 1.0
                status = self._iterate(cost, phase=1)
                if status != Optimal:
                    return self._result(status)
                infeasibility = float(self.x[n + m:].sum())
                if infeasibility > self.config.feasibilityTol * (1 + np.abs(self.b).max()):
                    return self._result(Infeasible, "phase 1 ended with infeasibility %.3g" % (infeasibility,))
                self.up[n + m:] = 0.0
            cost = np.zeros(self.numCols)
            cost[:n] = self.lp.cost
            status = self._iterate(cost, phase=2)
            return self._result(status)
        except RuntimeError as e:
            return self._result(IterationLimit, "numerical breakdown: %s" % (e,))

    def _result(self, status, message=""):
        n, m = self.n, self.m
        if status != Optimal:
            return LpSolution(status, message=message or status, iterations=self.iterations)
        values = self.x[:n].copy()
        basis = None
        if not np.any(self.basis >= n + m):
            basic = tuple(("x", int(col)) if col < n else ("s", int(col - n)) for col in self.basis)
            atUpper = frozenset(int(j) for j in range(n)
                if not self.isBasic[j] and self.x[j] == self.up[j] and self.up[j] != self.lo[j])
            basis = Basis(n, m, basic, atUpper)
        return LpSolution(Optimal, values, self.lp.objectiveValue(values), self.iterations, message, basis)

    def _column(self, col):
        n, m = self.n, self.m
        out = np.zeros(m)
        if col < n:
            start, end = self.A.indptr[col], self.A.indptr[col + 1]
            out[self.A.indices[start:end]] = self.A.data[start:end]
        elif col < n + m:
            out[col - n] = 1.0
        else:
            k = col - n - m
            out[self.artRows[k]] = self.artSigns[k]
        return out

    def _refactor(self):
        """!Factor the basis and recompute basic values from the nonbasic ones

        @throw RuntimeError if the basis is singular
        """
        n, m = self.n, self.m
        rowInds = []
        colInds = []
        data = []
        for pos, col in enumerate(self.basis):
            if col < n:
                start, end = self.A.indptr[col], self.A.indptr[col + 1]
                rowInds.extend(self.A.indices[start:end])
                data.extend(self.A.data[start:end])
                colInds.extend([pos] * (end - start))
            elif col < n + m:
                rowInds.append(col - n)
                data.append(1.0)
                colInds.append(pos)
            else:
                k = col - n - m
                rowInds.append(self.artRows[k])
                data.append(self.artSigns[k])
                colInds.append(pos)
        matrix = sparse.csc_matrix((data, (rowInds, colInds)), shape=(m, m))
        self.lu = sparseLinalg.splu(matrix)
        self.etas = []
        nonbasic = np.where(self.isBasic, 0.0, self.x)
        rhs = self.b - self.A @ nonbasic[:n] - nonbasic[n:n + m]
        if len(self.artRows):
            np.subtract.at(rhs, self.artRows, self.artSigns * nonbasic[n + m:])
        self.x[self.basis] = self.lu.solve(rhs)

    def _ftran(self, vec):
        out = self.lu.solve(vec)
        for pos, eta in self.etas:
            value = out[pos]
            if value != 0.0:
                out += eta * value
                out[pos] = eta[pos] * value
        return out

    def _btran(self, vec):
        out = vec.copy()
        for pos, eta in reversed(self.etas):
            out[pos] = out @ eta
        return self.lu.solve(out, trans="T")

    def _reducedCosts(self, cost):
        n, m = self.n, self.m
        y = self._btran(cost[self.basis])
        d = cost.copy()
        d[:n] -= self.A.T @ y
        d[n:n + m] -= y
        if len(self.artRows):
            d[n + m:] -= self.artSigns * y[self.artRows]
        return d

    def _iterate(self, cost, phase):
        config = self.config
        lo, up, x = self.lo, self.up, self.x
        degenerateRun = 0
        useBland = False
        while True:
            if self.iterations >= self.maxIterations:
                log.warn("%s: iteration limit %d reached in phase %d" % (self.lp.name, self.maxIterations, phase))
                return IterationLimit
            d = self._reducedCosts(cost)
            atUpper = x >= up
            movable = (~self.isBasic[:self.numCols]) & (lo < up)
            canIncrease = movable & ~atUpper & (d < -config.optimalityTol)
            canDecrease = movable & (x > lo) & (d > config.optimalityTol)
            eligible = canIncrease | canDecrease
            if not eligible.any():
                return Optimal
            if useBland:
                entering = int(np.flatnonzero(eligible)[0])
            else:
                entering = int(np.argmax(np.where(eligible, np.abs(d), -1.0)))
            direction = 1.0 if canIncrease[entering] else -1.0

            alpha = self._ftran(self._column(entering))
            change = direction * alpha
            basicLo = lo[self.basis]
            basicUp = up[self.basis]
            basicX = x[self.basis]
            limits = np.full(len(self.basis), np.inf)
            dec = change > config.pivotTol
            inc = change < -config.pivotTol
            limits[dec] = (basicX[dec] - basicLo[dec]) / change[dec]
            limits[inc] = (basicUp[inc] - basicX[inc]) / -change[inc]
            np.maximum(limits, 0.0, out=limits)
            stepLimit = float(limits.min()) if len(limits) else np.inf
            flipLimit = up[entering] - lo[entering]

            if flipLimit <= stepLimit:
                if not math.isfinite(flipLimit):
                    return Unbounded
                step = flipLimit
                x[self.basis] = basicX - change * step
                x[entering] = up[entering] if direction > 0 else lo[entering]
                self.iterations += 1
                degenerateRun = 0
                useBland = False
                continue

            ties = np.flatnonzero(limits <= stepLimit + 1e-12)
            if useBland:
                leavingPos = int(ties[np.argmin(self.basis[ties])])
            else:
                leavingPos = int(ties[np.argmax(np.abs(change[ties]))])
            step = stepLimit
            leaving = int(self.basis[leavingPos])
            x[self.basis] = basicX - change * step
            x[leaving] = lo[leaving] if change[leavingPos] > 0 else up[leaving]
            x[entering] += direction * step

            pivot = alpha[leavingPos]
            eta = -alpha / pivot
            eta[leavingPos] = 1.0 / pivot
            self.etas.append((leavingPos, eta))
            self.basis[leavingPos] = entering
            self.isBasic[leaving] = False
            self.isBasic[entering] = True
            self.iterations += 1

            if step <= 1e-12:
                degenerateRun += 1
                if degenerateRun >= config.blandAfter:
                    useBland = True
            else:
                degenerateRun = 0
                useBland = False
            if len(self.etas) >= config.refactorEvery:
                self._refactor()


class ScipyLpSolver(object):
    """!External solver: scipy.optimize.linprog with the HiGHS backend
    """
    def __init__(self, method="highs"):
        self.method = method

    def solve(self, lp, warmStart=None):
        """!Solve lp; warmStart is accepted for interface compatibility and ignored
        """
        if lp.numRows == 0:
            return _solveUnconstrained(lp)
        signs = {"<=": 1.0, ">=": -1.0}
        ubRows = [i for i, row in enumerate(lp.rows) if row.sense != "="]
        eqRows = [i for i, row in enumerate(lp.rows) if row.sense == "="]
        matrix = sparse.csr_matrix(lp.matrix())
        kwargs = dict()
        if ubRows:
            rowSigns = np.array([signs[lp.rows[i].sense] for i in ubRows])
            kwargs["A_ub"] = sparse.diags(rowSigns) @ matrix[ubRows]
            kwargs["b_ub"] = rowSigns * np.array([lp.rows[i].rhs for i in ubRows])
        if eqRows:
            kwargs["A_eq"] = matrix[eqRows]
            kwargs["b_eq"] = np.array([lp.rows[i].rhs for i in eqRows])
        bounds = [(lower, None if math.isinf(upper) else upper) for lower, upper in zip(lp.lower, lp.upper)]
        res = optimize.linprog(np.array(lp.cost), bounds=bounds, method=self.method, **kwargs)
        statusDict = {0: Optimal, 1: IterationLimit, 2: Infeasible, 3: Unbounded}
        status = statusDict.get(res.status, IterationLimit)
        if status != Optimal:
            return LpSolution(status, message=res.message, iterations=getattr(res, "nit", 0))
        values = np.asarray(res.x, dtype=float)
        return LpSolution(Optimal, values, lp.objectiveValue(values), getattr(res, "nit", 0), res.message)

    def __repr__(self):
        return "%s(%r)" % (type(self).__name__, self.method)


def solveLp(lp, solver=None, warmStart=None):
    """!Solve lp with solver (default: a SimplexSolver)
    """
    solver = solver or SimplexSolver()
    return solver.solve(lp, warmStart=warmStart)


def _lpName(name):
    return "".join(c if c.isalnum() or c in "_.[]" else "_" for c in str(name))


def _lpTerms(coeffs, varNames):
    terms = []
    for j, coef in coeffs:
        sign = "-" if coef < 0 else "+"
        terms.append("%s %.17g %s" % (sign, abs(coef), _lpName(varNames[j])))
    text = " ".join(terms) if terms else "0 %s" % (_lpName(varNames[0]),) if varNames else "0"
    return text[2:] if text.startswith("+ ") else text


def writeLpFile(lp):
    """!Return lp in CPLEX LP text format
    """
    lines = ["\\ %s" % (lp.name,), "Minimize"]
    lines.append(" obj: %s" % (_lpTerms([(j, c) for j, c in enumerate(lp.cost) if c != 0], lp.varNames),))
    lines.append("Subject To")
    for row in lp.rows:
        lines.append(" %s: %s %s %.17g" % (_lpName(row.name), _lpTerms(row.coeffs, lp.varNames), row.sense, row.rhs))
    lines.append("Bounds")
    for name, lower, upper in zip(lp.varNames, lp.lower, lp.upper):
        if math.isinf(upper):
            lines.append(" %s >= %.17g" % (_lpName(name), lower))
        else:
            lines.append(" %.17g <= %s <= %.17g" % (lower, _lpName(name), upper))
    lines.append("End")
    return "\n".join(lines) + "\n"
