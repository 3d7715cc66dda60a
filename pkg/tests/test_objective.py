"""Tests for advantages, entropy classification, clip regions and the three objectives."""

import math

import numpy as np
import pytest

from rlvr_lab.objective import (
    Algorithm,
    ClipRegion,
    ObjectiveConfig,
    ObjectiveError,
    archer_loss,
    assign_advantages,
    assign_thresholds,
    classify_tokens,
    clip_region,
    compute_loss,
    dapo_loss,
    entropy_quantile,
    group_advantages,
    grpo_loss,
    kl_term,
    select_beta,
    select_clip,
    surrogate_term,
)
from rlvr_lab.objective.gradcheck import build_batch, run_gradcheck
from rlvr_lab.pipeline.types import TokenClass
from rlvr_lab.policy.sampling import logprobs_under
from rlvr_lab.tensor import Tensor, no_grad, reset_graph

R = TokenClass.REASONING
K = TokenClass.KNOWLEDGE

ARCHER = ObjectiveConfig(algorithm=Algorithm.ARCHER)
DAPO = ObjectiveConfig(algorithm=Algorithm.DAPO)
GRPO_NO_KL = ObjectiveConfig(algorithm=Algorithm.GRPO, beta=0.0)


@pytest.fixture(autouse=True)
def clean_tape():
    reset_graph()
    yield
    reset_graph()


def _oracle_quantile(values, rho):
    xs = sorted(values)
    h = (len(xs) - 1) * rho
    lo = math.floor(h)
    if lo + 1 >= len(xs):
        return xs[lo]
    return xs[lo] + (h - lo) * (xs[lo + 1] - xs[lo])


def _random_batch(rng, make_response, n_responses=None):
    """Classified, advantaged responses plus a nearby logp_theta."""
    n = n_responses or int(rng.integers(2, 7))
    responses = []
    for i in range(n):
        length = int(rng.integers(1, 9))
        responses.append(make_response(
            tokens=rng.integers(0, 32, size=length),
            logprobs=rng.uniform(-4.0, -0.1, size=length),
            classes=[R if c else K for c in rng.integers(0, 2, size=length)],
            advantage=float(rng.normal()),
            threshold=1.0,
            response_index=i,
        ))
    old = np.concatenate([r.logprobs_old for r in responses])
    theta = old + rng.normal(0.0, 0.4, size=old.size)
    return responses, theta


class TestGroupAdvantages:
    @pytest.mark.parametrize("rewards,expected", [
        ([1, 0, 0, 1], [1, -1, -1, 1]),
        ([2, 0], [1, -1]),
        ([1, 1, 1, 1], [0, 0, 0, 0]),
    ])
    def test_examples(self, rewards, expected):
        np.testing.assert_allclose(group_advantages(rewards), expected)

    def test_single_reward_rejected(self):
        with pytest.raises(ValueError):
            group_advantages([1.0])

    def test_assign_writes_in_place(self, make_group):
        group = make_group([1, 0, 0, 1])
        assign_advantages([group])
        assert [r.advantage for r in group.responses] == pytest.approx([1, -1, -1, 1])


class TestEntropyQuantile:
    @pytest.mark.parametrize("values,rho,expected", [
        ([1, 2, 3, 4, 5], 0.8, 4.2),
        ([0.5], 0.8, 0.5),
        ([0.3, 0.3, 0.3], 0.8, 0.3),
    ])
    def test_examples(self, values, rho, expected):
        assert entropy_quantile(values, rho) == pytest.approx(expected, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            entropy_quantile([], 0.8)

    def test_matches_sort_and_interpolate(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            values = rng.exponential(size=int(rng.integers(1, 40)))
            rho = float(rng.uniform(0.05, 0.95))
            assert entropy_quantile(values, rho) == pytest.approx(_oracle_quantile(list(values), rho), abs=1e-12)


class TestClassifyTokens:
    def test_example(self):
        assert classify_tokens([1, 2, 3, 4, 5], 4.2) == [K, K, K, K, R]

    def test_all_equal_is_reasoning(self):
        assert classify_tokens([0.7, 0.7, 0.7], 0.7) == [R, R, R]

    @pytest.mark.parametrize("n", [5, 50, 500, 1000])
    def test_reasoning_fraction(self, n):
        values = np.random.default_rng(n).permutation(np.linspace(0.01, 3.0, n))
        classes = classify_tokens(values, entropy_quantile(values, 0.8))
        fraction = sum(c is R for c in classes) / n
        assert abs(fraction - 0.2) <= 2 / n

    def test_assign_thresholds(self, make_response, make_group):
        group = make_group([1, 0])
        group.responses[0] = make_response([2, 3, 4, 5, 6], entropies=[1, 2, 3, 4, 5])
        assign_thresholds([group], 0.8)
        first = group.responses[0]
        assert first.entropy_threshold == pytest.approx(4.2)
        assert first.token_classes == [K, K, K, K, R]
        assert group.responses[1].token_classes == [R]


class TestPerClassParameters:
    def test_reasoning_defaults(self):
        assert (select_clip(R, ARCHER), select_beta(R, ARCHER)) == (0.5, 0.0)

    def test_knowledge_defaults(self):
        assert (select_clip(K, ARCHER), select_beta(K, ARCHER)) == (0.2, 0.001)

    def test_needs_archer(self):
        with pytest.raises(ObjectiveError):
            select_clip(R, DAPO)

    def test_class_ordering_enforced(self):
        with pytest.raises(ValueError):
            ObjectiveConfig(eps_reasoning=0.1, eps_knowledge=0.2)
        with pytest.raises(ValueError):
            ObjectiveConfig(beta_reasoning=0.01, beta_knowledge=0.0)

    def test_uses_kl(self):
        assert ARCHER.uses_kl
        assert not DAPO.uses_kl
        assert not GRPO_NO_KL.uses_kl


class TestSurrogateTerm:
    def test_clipped_above(self):
        assert surrogate_term(1.6, 1.0, 0.5, 0.5) == pytest.approx(1.5)

    @pytest.mark.parametrize("adv", [-2.0, 0.5, 1.0])
    def test_identity_ratio(self, adv):
        assert surrogate_term(1.0, adv, 0.2, 0.2) == pytest.approx(adv)

    def test_negative_advantage_branch(self):
        assert surrogate_term(0.4, -1.0, 0.2, 0.2) == pytest.approx(-0.8)

    def test_clip_higher_window(self):
        assert surrogate_term(1.27, 1.0, 0.2, 0.28) == pytest.approx(1.27)
        assert surrogate_term(1.30, 1.0, 0.2, 0.28) == pytest.approx(1.28)

    def test_non_positive_ratio_rejected(self):
        with pytest.raises(ObjectiveError):
            surrogate_term(0.0, 1.0, 0.2, 0.2)

    def test_min_property(self):
        rng = np.random.default_rng(1)
        r = rng.uniform(0.05, 3.0, size=2000)
        adv = rng.normal(size=2000)
        out = surrogate_term(Tensor(r), adv, 0.2, 0.28).data
        assert np.all(out <= r * adv + 1e-15)
        assert np.all(out <= np.clip(r, 0.8, 1.28) * adv + 1e-15)


class TestKLTerm:
    def test_k3_non_negative(self):
        rng = np.random.default_rng(2)
        theta = rng.uniform(-10.0, 0.0, size=1_000_000)
        ref = rng.uniform(-10.0, 0.0, size=1_000_000)
        assert np.all(kl_term(Tensor(theta), ref).data >= 0)

    def test_zero_at_equality(self):
        values = np.random.default_rng(3).uniform(-5.0, 0.0, size=100)
        assert np.all(kl_term(Tensor(values), values).data == 0.0)

    def test_closed_forms(self):
        assert kl_term(0.0, math.log(2)) == pytest.approx(1 - math.log(2), abs=1e-10)
        assert kl_term(0.0, -math.log(2)) == pytest.approx(math.log(2) - 0.5, abs=1e-10)
        assert kl_term(0.0, math.log(2)) == pytest.approx(0.30685, abs=1e-5)

    def test_k1(self):
        assert kl_term(-1.0, -1.5, estimator="k1") == pytest.approx(0.5)

    def test_non_finite_reference_rejected(self):
        with pytest.raises(ObjectiveError):
            kl_term(Tensor([0.0]), [float("-inf")])


class TestArcherLoss:
    def test_single_reasoning_token(self, make_response):
        resp = make_response([5], logprobs=[0.0], classes=[R], advantage=1.0, threshold=1.0)
        loss, breakdown = archer_loss([resp], Tensor([math.log(1.6)]), None, ARCHER)
        assert loss.item() == pytest.approx(-1.5)
        assert breakdown[0].clipped
        assert breakdown[0].epsilon_used == 0.5
        assert breakdown[0].region is ClipRegion.C

    def test_identity_policy_is_minus_mean_advantage(self, make_response):
        rng = np.random.default_rng(4)
        responses, _ = _random_batch(rng, make_response)
        logp = np.concatenate([r.logprobs_old for r in responses])
        cfg = ObjectiveConfig(beta_reasoning=0.0, beta_knowledge=0.0)
        loss, _ = archer_loss(responses, Tensor(logp), None, cfg)
        per_token = np.concatenate([[r.advantage] * r.length for r in responses])
        assert loss.item() == pytest.approx(-per_token.mean(), abs=1e-12)

    def test_reduces_to_symmetric_dapo(self, make_response):
        rng = np.random.default_rng(5)
        for _ in range(100):
            eps = float(rng.uniform(0.05, 0.5))
            responses, theta = _random_batch(rng, make_response)
            archer_cfg = ObjectiveConfig(algorithm=Algorithm.ARCHER, eps_reasoning=eps, eps_knowledge=eps,
                                         beta_reasoning=0.0, beta_knowledge=0.0)
            dapo_cfg = ObjectiveConfig(algorithm=Algorithm.DAPO, eps_low=eps, eps_high=eps)
            a, _ = archer_loss(responses, Tensor(theta), None, archer_cfg)
            d, _ = dapo_loss(responses, Tensor(theta), dapo_cfg)
            assert a.item() == pytest.approx(d.item(), abs=1e-12)

    def test_reduces_to_grpo_with_kl_on_equal_lengths(self, make_response):
        rng = np.random.default_rng(8)
        for _ in range(50):
            n, length = int(rng.integers(2, 6)), int(rng.integers(1, 6))
            eps, beta = float(rng.uniform(0.05, 0.5)), float(rng.uniform(0.001, 0.1))
            responses = [
                make_response(
                    tokens=rng.integers(0, 32, size=length),
                    logprobs=rng.uniform(-4.0, -0.1, size=length),
                    classes=[R if c else K for c in rng.integers(0, 2, size=length)],
                    advantage=float(rng.normal()),
                    threshold=1.0,
                    response_index=i,
                )
                for i in range(n)
            ]
            old = np.concatenate([r.logprobs_old for r in responses])
            theta = old + rng.normal(0.0, 0.4, size=old.size)
            ref = old + rng.normal(0.0, 0.4, size=old.size)
            archer_cfg = ObjectiveConfig(algorithm=Algorithm.ARCHER, eps_reasoning=eps, eps_knowledge=eps,
                                         beta_reasoning=beta, beta_knowledge=beta)
            grpo_cfg = ObjectiveConfig(algorithm=Algorithm.GRPO, eps=eps, beta=beta)

            a_theta = Tensor(theta, requires_grad=True)
            a, _ = archer_loss(responses, a_theta, ref, archer_cfg)
            a.backward()
            reset_graph()
            g_theta = Tensor(theta, requires_grad=True)
            g, _ = grpo_loss(responses, g_theta, ref, grpo_cfg)
            g.backward()
            reset_graph()

            assert a.item() == pytest.approx(g.item(), abs=1e-12)
            np.testing.assert_allclose(a_theta.grad, g_theta.grad, atol=1e-12)

    def test_knowledge_kl_needs_reference(self, make_response):
        resp = make_response([5], logprobs=[-1.0], classes=[K], advantage=1.0, threshold=1.0)
        with pytest.raises(ObjectiveError):
            archer_loss([resp], Tensor([-1.0]), None, ARCHER)

    def test_unclassified_response_rejected(self, make_response):
        resp = make_response([5], advantage=1.0)
        with pytest.raises(ObjectiveError):
            archer_loss([resp], Tensor([-1.0]), None, ARCHER)

    def test_wrong_algorithm_rejected(self, make_response):
        resp = make_response([5], classes=[R], advantage=1.0, threshold=1.0)
        with pytest.raises(ObjectiveError):
            archer_loss([resp], Tensor([-1.0]), None, DAPO)


class TestDapoLoss:
    def test_identity_policy(self, make_response):
        responses = [
            make_response([2], advantage=1.0),
            make_response([3, 4, 5], advantage=-0.5, response_index=1),
        ]
        logp = np.concatenate([r.logprobs_old for r in responses])
        loss, _ = dapo_loss(responses, Tensor(logp), DAPO)
        assert loss.item() == pytest.approx(-(1.0 - 1.5) / 4)

    def test_missing_advantage_rejected(self, make_response):
        with pytest.raises(ObjectiveError):
            dapo_loss([make_response([2])], Tensor([-1.0]), DAPO)

    def test_shape_mismatch_rejected(self, make_response):
        with pytest.raises(ObjectiveError):
            dapo_loss([make_response([2, 3], advantage=1.0)], Tensor([-1.0]), DAPO)


class TestGrpoLoss:
    @staticmethod
    def _batch(make_response, lengths, advantages):
        return [
            make_response(list(range(2, 2 + n)), advantage=a, response_index=i)
            for i, (n, a) in enumerate(zip(lengths, advantages))
        ]

    def test_identity_policy(self, make_response):
        responses = self._batch(make_response, [1, 3, 2], [1.0, -0.5, 0.25])
        logp = np.concatenate([r.logprobs_old for r in responses])
        loss, _ = grpo_loss(responses, Tensor(logp), None, GRPO_NO_KL)
        assert loss.item() == pytest.approx(-(1.0 - 0.5 + 0.25) / 3)

    def test_sample_vs_token_aggregation(self, make_response):
        v, w = 1.0, -0.5
        responses = self._batch(make_response, [1, 3], [v, w])
        logp = Tensor(np.concatenate([r.logprobs_old for r in responses]))
        grpo, _ = grpo_loss(responses, logp, None, GRPO_NO_KL)
        token, _ = dapo_loss(responses, logp, DAPO)
        assert grpo.item() == pytest.approx(-(v + w) / 2, abs=1e-12)
        assert token.item() == pytest.approx(-(v + 3 * w) / 4, abs=1e-12)

    def test_equal_lengths_agree_with_token_level(self, make_response):
        rng = np.random.default_rng(6)
        for _ in range(20):
            responses = self._batch(make_response, [4] * 5, rng.normal(size=5))
            theta = np.concatenate([r.logprobs_old for r in responses]) + rng.normal(0.0, 0.3, size=20)
            g, _ = grpo_loss(responses, Tensor(theta), None, ObjectiveConfig(algorithm=Algorithm.GRPO, beta=0.0, eps=0.2))
            d, _ = dapo_loss(responses, Tensor(theta), ObjectiveConfig(algorithm=Algorithm.DAPO, eps_low=0.2, eps_high=0.2))
            assert g.item() == pytest.approx(d.item(), abs=1e-12)

    def test_kl_vanishes_at_reference(self, make_response):
        responses = self._batch(make_response, [2, 3], [1.0, -1.0])
        logp = np.concatenate([r.logprobs_old for r in responses]) + 0.1
        with_kl, breakdown = grpo_loss(responses, Tensor(logp), logp,
                                       ObjectiveConfig(algorithm=Algorithm.GRPO, beta=0.05))
        without, _ = grpo_loss(responses, Tensor(logp), None, GRPO_NO_KL)
        assert all(b.kl_term == 0.0 for b in breakdown)
        assert with_kl.item() == without.item()

    def test_positive_beta_needs_reference(self, make_response):
        responses = self._batch(make_response, [1], [1.0])
        with pytest.raises(ObjectiveError):
            grpo_loss(responses, Tensor([-1.0]), None, ObjectiveConfig(algorithm=Algorithm.GRPO, beta=0.05))

    def test_compute_loss_dispatch(self, make_response):
        responses = self._batch(make_response, [1, 3], [1.0, -0.5])
        logp = Tensor(np.concatenate([r.logprobs_old for r in responses]))
        assert compute_loss(responses, logp, None, GRPO_NO_KL)[0].item() == pytest.approx(-0.25)
        assert compute_loss(responses, logp, None, DAPO)[0].item() == pytest.approx(-(1.0 - 1.5) / 4)


def _region_oracle(r, sign, cls):
    """Independent geometry for the archer defaults (eps_k=0.2, eps_r=0.5)."""
    if 0.8 <= r <= 1.2:
        return "A"
    if sign >= 0:
        if r < 0.8:
            return "B"
        return "E" if cls is R and r <= 1.5 else "C"
    if r > 1.2:
        return "C"
    return "F" if cls is R and r >= 0.5 else "B"


class TestClipRegions:
    @pytest.mark.parametrize("r,sign,cls,expected", [
        (1.0, 1.0, R, ClipRegion.A),
        (1.35, 1.0, R, ClipRegion.E),
        (1.35, 1.0, K, ClipRegion.C),
        (1.6, 1.0, R, ClipRegion.C),
        (0.6, -1.0, R, ClipRegion.F),
        (0.6, -1.0, K, ClipRegion.B),
        (0.4, -1.0, R, ClipRegion.B),
        (0.6, 1.0, R, ClipRegion.B),
        (1.4, -1.0, R, ClipRegion.C),
    ])
    def test_examples(self, r, sign, cls, expected):
        assert clip_region(r, sign, cls, ARCHER) is expected

    def test_partition(self):
        rng = np.random.default_rng(7)
        for r, s, c in zip(rng.uniform(0.2, 2.0, size=5000), rng.choice([-1.0, 0.0, 1.0], size=5000),
                           rng.integers(0, 2, size=5000)):
            cls = R if c else K
            region = clip_region(float(r), float(s), cls, ARCHER)
            assert region.value == _region_oracle(r, s, cls)

    def test_baseline_objectives_use_abc(self):
        assert clip_region(1.27, 1.0, None, DAPO) is ClipRegion.A
        assert clip_region(1.30, 1.0, None, DAPO) is ClipRegion.C
        assert clip_region(0.7, -1.0, None, GRPO_NO_KL) is ClipRegion.B

    def test_non_positive_ratio_rejected(self):
        with pytest.raises(ValueError):
            clip_region(0.0, 1.0, R, ARCHER)


class TestClippedGradients:
    @staticmethod
    def _grad(make_response, ratio, cls, cfg, adv=1.0):
        resp = make_response([5], logprobs=[0.0], classes=[cls], advantage=adv, threshold=1.0)
        logp = Tensor([math.log(ratio)], requires_grad=True)
        loss, _ = compute_loss([resp], logp, None, cfg)
        loss.backward()
        return float(logp.grad[0])

    @pytest.mark.parametrize("ratio", [1.21, 1.35, 1.49])
    def test_region_e_keeps_signal(self, make_response, ratio):
        baseline = ObjectiveConfig(algorithm=Algorithm.DAPO, eps_low=0.2, eps_high=0.2)
        assert self._grad(make_response, ratio, R, ARCHER) != 0.0
        assert self._grad(make_response, ratio, R, baseline) == 0.0

    def test_knowledge_token_clipped_at_baseline(self, make_response):
        cfg = ObjectiveConfig(beta_reasoning=0.0, beta_knowledge=0.0)
        assert self._grad(make_response, 1.35, K, cfg) == 0.0

    def test_negative_advantage_below_window(self, make_response):
        assert self._grad(make_response, 0.5, R, DAPO, adv=-1.0) == 0.0

    def test_inside_window_gradient(self, make_response):
        # d/dlogp of -(r A) at r = 1.1 with one token
        assert self._grad(make_response, 1.1, R, ARCHER) == pytest.approx(-1.1)


class TestGradcheck:
    def test_tiny_scale_passes(self):
        results = run_gradcheck(seed=0, scale="tiny", coords=4)
        assert {r.objective for r in results} == {"grpo", "dapo", "archer"}
        assert all(r.passed for r in results), results

    def test_tiny_scale_checks_every_coordinate(self):
        theta, _, _ = build_batch(0, "tiny")
        results = run_gradcheck(seed=0, scale="tiny")
        assert all(r.coords_checked == theta.num_params for r in results)
        assert all(r.passed for r in results), results

    def test_batch_covers_every_clip_region(self):
        results = run_gradcheck(seed=0, scale="tiny", coords=1)
        for r in results:
            if r.objective == "archer":
                assert set(r.region_counts) == {"A", "B", "C", "E", "F"}, r.region_counts
            else:
                assert set(r.region_counts) == {"A", "B", "C"}, r.region_counts

    def test_forced_ratios_reach_clipped_branches(self):
        theta, _, groups = build_batch(3, "tiny")
        responses = [r for g in groups for r in g.responses]
        with no_grad():
            logp = np.concatenate([logprobs_under(theta, r.prompt, r.tokens).data for r in responses])
        ratios = np.exp(logp - np.concatenate([r.logprobs_old for r in responses]))
        assert np.all((ratios < 0.8) | (ratios > 1.2) | np.isclose(ratios, 1.0))
        assert np.any(ratios < 0.5) and np.any(ratios > 1.5)

    def test_corrupted_gradient_fails(self):
        results = run_gradcheck(seed=0, scale="tiny", coords=4, corrupt_gradient=True)
        assert not any(r.passed for r in results)

    @pytest.mark.slow
    def test_default_scale_passes(self):
        results = run_gradcheck(seed=1, scale="default")
        assert all(r.max_rel_error < 1e-4 for r in results), results
