import numpy as np
import pytest

from momext.hierarchy import SDPBlock, SDPProblem
from momext.sdp import SolveOptions, solve


def lmi_problem(blocks, c, eq_a=None, eq_b=None, const=0.0):
    nv = len(c)
    return SDPProblem(
        var_names=[f"v{i}" for i in range(nv)],
        blocks=blocks,
        eq_a=np.zeros((0, nv)) if eq_a is None else np.asarray(eq_a, dtype=float),
        eq_b=np.zeros(0) if eq_b is None else np.asarray(eq_b, dtype=float),
        objective=np.asarray(c, dtype=float),
        obj_const=const,
        is_real=True,
    )


def random_strictly_feasible(rng):
    """Both-sides strictly feasible instance with blocks <= 8, vars <= 30."""
    f = int(rng.integers(2, 31))
    nb = int(rng.integers(1, 4))
    u0 = rng.standard_normal(f)
    blocks = []
    c = np.zeros(f)
    for b in range(nb):
        nn = int(rng.integers(1, 9))
        stack = rng.standard_normal((f, nn, nn))
        stack = (stack + np.transpose(stack, (0, 2, 1))) / 2
        z0 = rng.standard_normal((nn, nn))
        z0 = z0 @ z0.T + 0.5 * np.eye(nn)
        const = z0 - np.einsum("k,kij->ij", u0, stack)
        x0 = rng.standard_normal((nn, nn))
        x0 = x0 @ x0.T + 0.5 * np.eye(nn)
        c += np.einsum("kij,ij->k", stack, x0)
        blocks.append(SDPBlock(f"b{b}", nn, const, {i: stack[i] for i in range(f)}))
    return lmi_problem(blocks, c)


class TestAnalyticToy:
    def test_min_x_bordered(self):
        # min x s.t. [[x, 1], [1, x]] >= 0 has optimum x = 1
        blk = SDPBlock("toy", 2, np.array([[0.0, 1.0], [1.0, 0.0]]),
                       {0: np.eye(2)})
        sol = solve(lmi_problem([blk], [1.0]))
        assert sol.status == "optimal"
        assert abs(sol.primal_objective - 1.0) <= 1e-6
        assert abs(sol.dual_objective - 1.0) <= 1e-6

    def test_weak_duality_every_certified_iterate(self):
        blk = SDPBlock("toy", 2, np.array([[0.0, 1.0], [1.0, 0.0]]),
                       {0: np.eye(2)})
        sol = solve(lmi_problem([blk], [1.0]))
        for p, d in sol.certified_bounds(1e-8):
            assert p >= d - 10 * 1e-8


class TestRandomInstances:
    def test_gap_target_rate(self):
        rng = np.random.default_rng(7)
        solved = 0
        for _ in range(40):
            problem = random_strictly_feasible(rng)
            sol = solve(problem, SolveOptions(gap_tolerance=1e-8))
            if sol.status == "optimal" and sol.gap <= 1e-7 and sol.iterations <= 100:
                solved += 1
                # optimal status certifies the gap and near-feasible blocks
                assert (abs(sol.primal_objective - sol.dual_objective)
                        <= 1e-8 * (1 + abs(sol.primal_objective)))
                for block in problem.blocks:
                    m = block.evaluate(sol.variables)
                    lam = np.linalg.eigvalsh((m + m.T) / 2)[0]
                    assert lam >= -1e-6 * max(1.0, np.linalg.norm(m, 2))
        assert solved >= 38  # >= 95%

    def test_weak_duality_on_random_runs(self):
        rng = np.random.default_rng(19)
        for _ in range(10):
            sol = solve(random_strictly_feasible(rng))
            for p, d in sol.certified_bounds(1e-8):
                assert p >= d - 10 * 1e-8


class TestEqualityPresolve:
    def test_equalities_eliminated(self):
        # min x0 + x1 s.t. x0 - x1 = 0 and diag(x0, 2 - x1) >= 0 -> x = 0
        blk = SDPBlock("b", 2, np.diag([0.0, 2.0]),
                       {0: np.diag([1.0, 0.0]), 1: np.diag([0.0, -1.0])})
        sol = solve(lmi_problem([blk], [1.0, 1.0],
                                eq_a=[[1.0, -1.0]], eq_b=[0.0]))
        assert sol.status == "optimal"
        assert abs(sol.primal_objective) <= 1e-6
        assert abs(sol.variables[0] - sol.variables[1]) <= 1e-9

    def test_inconsistent_rows_detected(self):
        blk = SDPBlock("b", 1, np.array([[1.0]]), {0: np.array([[1.0]])})
        sol = solve(lmi_problem([blk], [1.0],
                                eq_a=[[1.0], [1.0]], eq_b=[0.0, 1.0]))
        assert sol.status == "infeasible_suspected"

    def test_fully_determined(self):
        blk = SDPBlock("b", 1, np.array([[0.0]]), {0: np.array([[1.0]])})
        sol = solve(lmi_problem([blk], [1.0], eq_a=[[1.0]], eq_b=[2.0]))
        assert sol.status == "optimal"
        assert abs(sol.primal_objective - 2.0) <= 1e-12


class TestOptions:
    def test_validation(self):
        with pytest.raises(ValueError):
            SolveOptions(gap_tolerance=0.0)
        with pytest.raises(ValueError):
            SolveOptions(step_damping=1.5)

    def test_requires_realified(self):
        blk = SDPBlock("b", 1, np.array([[1.0 + 0j]]), {0: np.array([[1.0 + 0j]])})
        problem = SDPProblem(["v0"], [blk], np.zeros((0, 1)), np.zeros(0),
                             np.array([1.0]), 0.0, is_real=False)
        with pytest.raises(ValueError):
            solve(problem)

    def test_objective_constant_carried(self):
        blk = SDPBlock("toy", 2, np.array([[0.0, 1.0], [1.0, 0.0]]),
                       {0: np.eye(2)})
        sol = solve(lmi_problem([blk], [1.0], const=5.0))
        assert abs(sol.primal_objective - 6.0) <= 1e-6


class TestDeterminism:
    def test_identical_runs(self):
        rng = np.random.default_rng(23)
        problem = random_strictly_feasible(rng)
        a = solve(problem)
        b = solve(problem)
        assert a.iterations == b.iterations
        np.testing.assert_array_equal(a.variables, b.variables)
        assert a.history == b.history
