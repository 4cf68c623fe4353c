#!/usr/bin/env python
"""Tests of the linear program model and the built-in simplex solver
"""
import itertools
import unittest

import numpy as np

from srlgProtect import Infeasible, IterationLimit, LinearProgram, LpError, Optimal, ScipyLpSolver, \
    SimplexSolver, Unbounded, checkFeasible, solveLp, writeLpFile


def _randomLp(rng, numVars, numRows, upper=10.0, anchored=True):
    """!A random bounded LP

    If anchored, every row holds at a random interior point, so the LP is feasible;
    otherwise right-hand sides are drawn independently and the LP may be infeasible.
    """
    lp = LinearProgram("random")
    for j in range(numVars):
        lp.addVariable(lower=0.0, upper=upper, cost=rng.uniform(-5.0, 5.0))
    point = rng.uniform(0.0, upper, size=numVars)
    for i in range(numRows):
        coeffs = rng.uniform(-3.0, 3.0, size=numVars)
        coeffs[rng.random(numVars) < 0.3] = 0.0
        activity = float(np.dot(coeffs, point))
        sense = ("<=", ">=", "=")[i % 3] if numRows > 2 else "<="
        if not anchored:
            rhs = rng.uniform(-1.5, 1.5) * upper
        elif sense == "<=":
            rhs = activity + rng.uniform(0.0, 2.0)
        elif sense == ">=":
            rhs = activity - rng.uniform(0.0, 2.0)
        else:
            rhs = activity
        lp.addRow(dict(enumerate(coeffs)), sense, rhs)
    return lp


def _vertexOptimum(lp, tol=1e-7):
    """!Minimum objective over the vertices of an LP with finite bounds, or None if none is feasible

    Every choice of numVars hyperplanes among the rows and bounds is intersected; the feasible
    intersection points are the vertices.
    """
    numVars = lp.numVars
    rowMat = np.zeros((lp.numRows, numVars))
    for i, row in enumerate(lp.rows):
        for j, coef in row.coeffs:
            rowMat[i, j] = coef
    rhs = np.array([row.rhs for row in lp.rows])
    senses = [row.sense for row in lp.rows]
    lower = np.array(lp.lower)
    upper = np.array(lp.upper)

    planes = np.vstack((rowMat, np.eye(numVars), np.eye(numVars)))
    offsets = np.concatenate((rhs, lower, upper))
    subsets = np.array(list(itertools.combinations(range(len(planes)), numVars)))
    mats = planes[subsets]
    keep = np.abs(np.linalg.det(mats)) > 1e-9
    if not keep.any():
        return None
    points = np.linalg.solve(mats[keep], offsets[subsets[keep]][..., np.newaxis])[..., 0]

    ok = np.all(points >= lower - tol, axis=1) & np.all(points <= upper + tol, axis=1)
    activity = points @ rowMat.T
    for i, sense in enumerate(senses):
        rowTol = tol * (1.0 + abs(rhs[i]))
        if sense == "<=":
            ok &= activity[:, i] <= rhs[i] + rowTol
        elif sense == ">=":
            ok &= activity[:, i] >= rhs[i] - rowTol
        else:
            ok &= np.abs(activity[:, i] - rhs[i]) <= rowTol
    if not ok.any():
        return None
    return float(np.min(points[ok] @ np.array(lp.cost)))


class TestLinearProgram(unittest.TestCase):
    def testBuild(self):
        lp = LinearProgram("build")
        x = lp.addVariable("x", cost=1.0)
        y = lp.addVariable(upper=4.0)
        self.assertEqual(lp.varNames, ["x", "x1"])
        row = lp.addRow([(x, 1.0), (y, 2.0), (x, 1.0), (y, -2.0)], ">=", 1.0)
        self.assertEqual(lp.rows[row].coeffs, ((x, 2.0),))
        self.assertEqual(lp.rows[row].name, "r0")
        self.assertEqual(lp.matrix().shape, (1, 2))
        self.assertEqual(repr(lp), "LinearProgram('build', vars=2, rows=1)")
        other = lp.copy()
        other.addRow({y: 1.0}, "<=", 3.0)
        self.assertEqual((lp.numRows, other.numRows), (1, 2))

    def testErrors(self):
        lp = LinearProgram()
        x = lp.addVariable()
        self.assertRaises(LpError, lp.setBounds, x, 2.0, 1.0)
        self.assertRaises(LpError, lp.addVariable, lower=float("-inf"))
        self.assertRaises(LpError, lp.addRow, {x: 1.0}, "<", 1.0)
        self.assertRaises(LpError, lp.addRow, {x: 1.0}, "<=", float("inf"))
        self.assertRaises(LpError, lp.addRow, {5: 1.0}, "<=", 1.0)
        self.assertRaises(LpError, lp.setCost, 3, 1.0)

    def testCheckFeasible(self):
        lp = LinearProgram()
        x = lp.addVariable(upper=1.0)
        lp.addRow({x: 1.0}, ">=", 0.5)
        self.assertEqual(checkFeasible(lp, [0.7]), [])
        self.assertEqual([v[:2] for v in checkFeasible(lp, [0.2])], [("row", 0)])
        self.assertEqual([v[:2] for v in checkFeasible(lp, [1.5])], [("bound", 0)])

    def testLpFile(self):
        lp = LinearProgram("small")
        x = lp.addVariable("x[1]", cost=2.0)
        y = lp.addVariable("y-2", upper=3.0, cost=-1.0)
        lp.addRow({x: 1.0, y: -1.0}, ">=", 0.5, name="split row")
        text = writeLpFile(lp)
        self.assertIn("Minimize", text)
        self.assertIn(" obj: 2 x[1] - 1 y_2", text)
        self.assertIn(" split_row: 1 x[1] - 1 y_2 >= 0.5", text)
        self.assertIn(" 0 <= y_2 <= 3", text)
        self.assertTrue(text.endswith("End\n"))


class TestSimplex(unittest.TestCase):
    def setUp(self):
        self.solver = SimplexSolver()

    def testSmall(self):
        # max x + y s.t. x + 2y <= 4, 3x + y <= 6
        lp = LinearProgram()
        x = lp.addVariable(cost=-1.0)
        y = lp.addVariable(cost=-1.0)
        lp.addRow({x: 1.0, y: 2.0}, "<=", 4.0)
        lp.addRow({x: 3.0, y: 1.0}, "<=", 6.0)
        solution = self.solver.solve(lp)
        self.assertEqual(solution.status, Optimal)
        self.assertTrue(solution.isOptimal)
        np.testing.assert_allclose(solution.values, [1.6, 1.2], atol=1e-9)
        self.assertAlmostEqual(solution.objective, -2.8)

    def testUnconstrained(self):
        lp = LinearProgram()
        lp.addVariable(lower=1.0, upper=2.0, cost=-1.0)
        lp.addVariable(lower=0.5, cost=1.0)
        solution = solveLp(lp)
        np.testing.assert_allclose(solution.values, [2.0, 0.5])
        lp.addVariable(cost=-1.0)
        self.assertEqual(solveLp(lp).status, Unbounded)

    def testInfeasible(self):
        lp = LinearProgram()
        x = lp.addVariable()
        y = lp.addVariable()
        lp.addRow({x: 1.0, y: 1.0}, "<=", 1.0)
        lp.addRow({x: 1.0, y: 1.0}, ">=", 2.0)
        self.assertEqual(self.solver.solve(lp).status, Infeasible)
        self.assertEqual(ScipyLpSolver().solve(lp).status, Infeasible)

    def testUnbounded(self):
        lp = LinearProgram()
        x = lp.addVariable(cost=-1.0)
        y = lp.addVariable()
        lp.addRow({x: 1.0, y: -1.0}, "<=", 1.0)
        self.assertEqual(self.solver.solve(lp).status, Unbounded)

    def testEquality(self):
        lp = LinearProgram()
        xs = [lp.addVariable(cost=cost) for cost in (3.0, 1.0, 2.0)]
        lp.addRow(dict((x, 1.0) for x in xs), "=", 1.0)
        solution = self.solver.solve(lp)
        np.testing.assert_allclose(solution.values, [0.0, 1.0, 0.0], atol=1e-12)

    def testIterationLimit(self):
        lp = _randomLp(np.random.default_rng(1), 8, 6)
        self.assertEqual(SimplexSolver(maxIterations=0).solve(lp).status, IterationLimit)

    def testVertexOracle(self):
        rng = np.random.default_rng(2024)
        numInfeasible = 0
        for trial in range(100):
            numVars = int(rng.integers(1, 7))
            numRows = int(rng.integers(1, 7))
            lp = _randomLp(rng, numVars, numRows, anchored=trial % 2 == 0)
            expected = _vertexOptimum(lp)
            solution = self.solver.solve(lp)
            if expected is None:
                numInfeasible += 1
                self.assertEqual(solution.status, Infeasible, "trial %d: %s" % (trial, solution.message))
                continue
            self.assertEqual(solution.status, Optimal, "trial %d: %s" % (trial, solution.message))
            self.assertAlmostEqual(solution.objective, expected, delta=1e-6 * (1 + abs(expected)),
                msg="trial %d" % (trial,))
        self.assertGreater(numInfeasible, 0)

    def testVertexOracleInfeasible(self):
        lp = LinearProgram()
        xs = [lp.addVariable(upper=10.0, cost=1.0) for ind in range(3)]
        lp.addRow(dict((x, 1.0) for x in xs), ">=", 31.0)
        lp.addRow({xs[0]: 1.0, xs[1]: -1.0}, "=", 2.0)
        self.assertIsNone(_vertexOptimum(lp))
        self.assertEqual(self.solver.solve(lp).status, Infeasible)
        lp.rows[0] = lp.rows[0]._replace(rhs=20.0)
        self.assertAlmostEqual(_vertexOptimum(lp), 20.0)
        self.assertAlmostEqual(self.solver.solve(lp).objective, 20.0)

    def testAgreesWithHighs(self):
        rng = np.random.default_rng(7)
        highs = ScipyLpSolver()
        for trial in range(30):
            lp = _randomLp(rng, int(rng.integers(3, 12)), int(rng.integers(2, 10)))
            ours = self.solver.solve(lp)
            theirs = highs.solve(lp)
            self.assertEqual((ours.status, theirs.status), (Optimal, Optimal), "trial %d" % (trial,))
            self.assertAlmostEqual(ours.objective, theirs.objective, delta=1e-6 * (1 + abs(theirs.objective)))
            self.assertEqual(checkFeasible(lp, ours.values, tol=1e-7), [])

    def testWarmStart(self):
        rng = np.random.default_rng(3)
        for trial in range(20):
            lp = _randomLp(rng, 6, 4)
            first = self.solver.solve(lp)
            self.assertTrue(first.isOptimal)
            # cut off the current optimum, keeping the interior point feasible
            coeffs = rng.uniform(0.5, 1.5, size=lp.numVars)
            lp.addRow(dict(enumerate(coeffs)), "<=", float(np.dot(coeffs, first.values)) * 0.9 + 1.0)
            warm = self.solver.solve(lp, warmStart=first.basis)
            cold = self.solver.solve(lp)
            self.assertEqual(warm.status, cold.status)
            if cold.isOptimal:
                self.assertAlmostEqual(warm.objective, cold.objective, delta=1e-7 * (1 + abs(cold.objective)))
                self.assertGreaterEqual(warm.objective, first.objective - 1e-9)

    def testDegenerate(self):
        # many rows through the same vertex
        lp = LinearProgram()
        x = lp.addVariable(cost=-1.0)
        y = lp.addVariable(cost=-1.0)
        for slope in np.linspace(0.1, 10.0, 25):
            lp.addRow({x: slope, y: 1.0}, "<=", slope + 1.0)
        solution = self.solver.solve(lp)
        self.assertTrue(solution.isOptimal)
        self.assertAlmostEqual(solution.objective, -2.0, places=8)


if __name__ == "__main__":
    unittest.main()
