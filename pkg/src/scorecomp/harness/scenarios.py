"""Seeded scenario runners.  Each returns a :class:`RunReport`."""

from __future__ import annotations

import logging

import numpy as np

from .. import streams
from ..compose import ConditionSet, compose_scores_convex, compose_scores_thm1
from ..denoise import GmmDenoiser, oracle_denoisers
from ..models import (
    DegenerateModelError,
    GaussianModel,
    GmmModel,
    MatrixGaussianModel,
    PivotTreeSpec,
    build_pivot_tree,
    independent_matrix_model,
    marginal,
    random_pivot_tree_spec,
)
from ..sampler import expected_composed_steps, sample_matrix_batch
from . import stats
from .config import ExperimentConfig, gmm_from_dict, pivot_tree_from_dict
from .report import RunReport

log = logging.getLogger(__name__)

# salts for derived seed families
_THEOREM, _VRS, _CONDITION, _SAMPLE, _SWEEP, _STATS = range(6)


def derive_seeds(seed: int, salt: int, n: int) -> list[int]:
    """``n`` run seeds derived from a scenario seed; disjoint salts give
    unrelated families."""
    words = np.random.SeedSequence([int(seed), int(salt)]).generate_state(n, dtype=np.uint64)
    return [int(w) for w in words]


def _aux(seed: int, *key: int) -> np.random.Generator:
    return streams.stream(seed, streams.AUX, *key)


# -- composition error oracles -------------------------------------------------


def pivot_scores(model: MatrixGaussianModel, pivot, points: np.ndarray):
    """Oracle row, column, entry and joint scores at the pivot coordinates.

    ``points`` are flat joint vectors ``(M, V*F*d)``.
    """
    i0, j0 = pivot
    d = model.entry_dim
    row = model.row_entries(i0)
    col = model.col_entries(j0)
    row_score = marginal(model, row).score(points[:, model.coords(row)])[:, j0 * d:(j0 + 1) * d]
    col_score = marginal(model, col).score(points[:, model.coords(col)])[:, i0 * d:(i0 + 1) * d]
    pivot_idx = model.entry_slice(pivot)
    entry_score = marginal(model, [pivot]).score(points[:, pivot_idx])
    joint = model.joint.score(points)
    return row_score, col_score, entry_score, joint[:, pivot_idx], joint


def theorem_error(model: MatrixGaussianModel, pivot, points: np.ndarray) -> float:
    """``max |composed - joint| / (1 + ||joint score||_inf)`` over the points."""
    row, col, entry, joint_pivot, joint = pivot_scores(model, pivot, points)
    composed = compose_scores_thm1(row, col, entry)
    scale = 1.0 + np.max(np.abs(joint), axis=1)
    return float(np.max(np.max(np.abs(composed - joint_pivot), axis=1) / scale))


def _draw_family(cfg: ExperimentConfig, seed: int, m: int, noise: float, wiring: str, coeff_scale=0.8):
    th = cfg.theorem
    shape_rng = _aux(seed, _THEOREM, m)
    v = int(shape_rng.integers(th.v_range[0], th.v_range[1] + 1))
    f = int(shape_rng.integers(th.f_range[0], th.f_range[1] + 1))
    d = int(th.d_choices[int(shape_rng.integers(len(th.d_choices)))])
    # same coefficient draws at every noise level and wiring
    spec = random_pivot_tree_spec(_aux(seed, _THEOREM, m, 1), v, f, d, noise=noise, wiring=wiring,
                                  coeff_scale=coeff_scale)
    return spec


def run_validate_theorem(cfg: ExperimentConfig, seed: int) -> RunReport:
    th = cfg.theorem
    report = RunReport("validate-theorem", seed, cfg.config_hash)
    per_model = []
    skips = []
    families = {"tree": th.wiring, "control": th.control_wiring, "both_anchors": "both_anchors"}
    worst = {name: np.zeros(th.n_models) for name in families}
    worst_independent = 0.0
    for m in range(th.n_models):
        for level in th.noise_levels:
            rec = {"model": m, "noise": level}
            for name, wiring in families.items():
                try:
                    spec = _draw_family(cfg, seed, m, level, wiring)
                    model = build_pivot_tree(spec)
                except DegenerateModelError as exc:
                    skips.append({"model": m, "noise": level, "family": name, "reason": str(exc)})
                    continue
                points = model.joint.sample(_aux(seed, _THEOREM, m, 2), th.n_points)
                err = theorem_error(model, spec.pivot, points)
                rec[name] = err
                rec["shape"] = [spec.v, spec.f, spec.entry_dim]
                worst[name][m] = max(worst[name][m], err)
            indep_spec = _draw_family(cfg, seed, m, level, "tree", coeff_scale=0.0)
            indep = build_pivot_tree(indep_spec)
            points = indep.joint.sample(_aux(seed, _THEOREM, m, 3), th.n_points)
            rec["independent"] = theorem_error(indep, indep_spec.pivot, points)
            worst_independent = max(worst_independent, rec["independent"])
            per_model.append(rec)

    global_max = float(np.max(worst["tree"]))
    report.check("max_composed_vs_joint_error", global_max, global_max <= th.tolerance, f"<= {th.tolerance:g}")
    report.check("independent_max_error", worst_independent, worst_independent <= th.independent_tolerance,
                 f"<= {th.independent_tolerance:g}")
    frac = float(np.mean(worst["control"] > th.control_threshold))
    report.check("control_fraction_above_threshold", frac, frac >= th.control_fraction,
                 f">= {th.control_fraction:g} of models with error > {th.control_threshold:g}")
    report.add("control_min_error", float(np.min(worst["control"])))
    report.add("both_anchors_max_error", float(np.max(worst["both_anchors"])))
    report.add("skipped_models", len(skips))
    report.details = {"per_model": per_model, "skipped": skips}
    return report


# -- variance-reducing sampling ablation ----------------------------------------


def mismatched_pair(shape, modes, std: float, delta: float) -> tuple[GmmDenoiser, GmmDenoiser]:
    """Row model with modes ``m * 1`` over F*d values, column model with the
    modes shifted by ``delta`` over V*d values; each row or column commits
    to a single mode."""
    v, f, d = shape
    row = GmmModel.isotropic([0.5, 0.5], [[m] * (f * d) for m in modes], std)
    col = GmmModel.isotropic([0.5, 0.5], [[m + delta] * (v * d) for m in modes], std)
    return GmmDenoiser(row), GmmDenoiser(col)


def consensus_distance(samples: np.ndarray, modes, delta: float) -> np.ndarray:
    """Per-sample mean distance of entries to the nearest consensus mode
    ``m + delta / 2``; ``samples`` shaped ``(B, V, F, d)``."""
    centers = np.asarray(modes, dtype=np.float64) + 0.5 * delta
    dist = np.linalg.norm(samples[..., None, :] - centers[:, None], axis=-1)
    return dist.min(axis=-1).mean(axis=(1, 2))


def _vrs_arm(cfg, seeds, delta, n_rollback, snapshots, **overrides):
    vr = cfg.vrs
    shape = tuple(vr.shape)
    row, col = mismatched_pair(shape, vr.modes, vr.component_std, delta)
    comp = cfg.composition.build(n_rollback=n_rollback, rollback_repeats=vr.rollback_repeats, **overrides)
    return sample_matrix_batch(row, col, cfg.schedule.build(), comp, None, seeds, shape=shape,
                               snapshots=snapshots)


def prediction_bimodality(run, step: int) -> float | None:
    """Bimodality coefficient of the pooled row and column predictions of
    clean data at the last repeat of ``step``, or None without snapshots."""
    snaps = [s for s in run.snapshots if s.step == step]
    if not snaps:
        return None
    snap = snaps[-1]
    return stats.bimodality_coefficient(np.concatenate([snap.row_pred.ravel(), snap.col_pred.ravel()]))


def run_ablate_vrs(cfg: ExperimentConfig, seed: int, snapshots: bool = True) -> RunReport:
    vr = cfg.vrs
    report = RunReport("ablate-vrs", seed, cfg.config_hash)
    seeds = derive_seeds(seed, _VRS, vr.n_seeds)
    boot_rng = _aux(seed, _STATS, 0)
    details = {}
    for label, delta in (("mismatch", vr.delta), ("control", vr.control_delta)):
        plain, run_plain = _vrs_arm(cfg, seeds, delta, 0, snapshots)
        vrs, run_vrs = _vrs_arm(cfg, seeds, delta, vr.n_rollback, snapshots)
        d_plain = consensus_distance(plain, vr.modes, delta)
        diff = consensus_distance(vrs, vr.modes, delta) - d_plain
        report.add(f"{label}_distance_plain", d_plain.mean())
        report.add(f"{label}_distance_vrs", d_plain.mean() + diff.mean())
        report.add(f"{label}_paired_t_pvalue", stats.paired_t_pvalue(diff))
        if label == "mismatch":
            lo, hi = stats.bootstrap_mean_ci(diff, vr.ci_level, vr.n_boot, boot_rng)
            report.add("mismatch_diff_mean", diff.mean())
            report.add("mismatch_diff_ci_low", lo)
            report.check("mismatch_diff_ci_high", hi, hi < 0.0,
                         f"{vr.ci_level:g} bootstrap CI of (vrs - plain) entirely below 0")
        else:
            lo, hi = stats.bootstrap_mean_ci(diff, 1.0 - vr.control_alpha, vr.n_boot, boot_rng)
            report.add("control_diff_ci_low", lo)
            report.add("control_diff_ci_high", hi)
            report.check("control_diff_mean", diff.mean(), lo <= 0.0 <= hi,
                         f"{1 - vr.control_alpha:g} bootstrap CI of (vrs - plain) contains 0")

        # same comparison with the variance-matched rollback noise, for reference
        matched, _ = _vrs_arm(cfg, seeds, delta, vr.n_rollback, False, renoise="variance_matched")
        matched_diff = consensus_distance(matched, vr.modes, delta) - d_plain
        report.add(f"{label}_variance_matched_diff_mean", matched_diff.mean())
        report.add(f"{label}_variance_matched_t_pvalue", stats.paired_t_pvalue(matched_diff))

        details[label] = {"delta": delta}
        if snapshots:
            curve_plain = [prediction_bimodality(run_plain, i) for i in range(run_plain.schedule.n_steps)]
            curve_vrs = [prediction_bimodality(run_vrs, i) for i in range(run_vrs.schedule.n_steps)]
            details[label].update(bimodality_plain=curve_plain, bimodality_vrs=curve_vrs)
            step = vr.bimodality_step
            if label == "mismatch" and step < run_plain.schedule.n_steps:
                bc_plain, bc_vrs = curve_plain[step], curve_vrs[step]
                report.check(f"bimodality_plain_step{step}", bc_plain, bc_plain > stats.UNIFORM_BC,
                             f"> {stats.UNIFORM_BC:.6g}")
                report.check(f"bimodality_vrs_step{step}", bc_vrs, bc_vrs < bc_plain,
                             f"< bimodality_plain_step{step}")
        report.add(f"{label}_final_bimodality_plain", stats.bimodality_coefficient(plain))
        report.add(f"{label}_final_bimodality_vrs", stats.bimodality_coefficient(vrs))
    report.check("composed_steps_vrs", run_vrs.composed_steps,
                 run_vrs.composed_steps == expected_composed_steps(
                     run_vrs.schedule.n_steps, vr.n_rollback, vr.rollback_repeats),
                 "N + N_r * (R - 1)")
    report.instrumentation = {"vrs_steps": run_vrs.records()}
    report.details = details
    return report


# -- scale sweep ----------------------------------------------------------------


def run_sweep_s(cfg: ExperimentConfig, seed: int) -> RunReport:
    sw = cfg.sweep
    v, f, d = sw.shape
    report = RunReport("sweep-s", seed, cfg.config_hash)
    comp = cfg.composition.build()
    swapped = cfg.composition.build(orientation="equation" if comp.orientation == "algorithm" else "algorithm")
    curve = []
    swap_diff = 0.0
    swap_scale = 0.0
    indep_max = 0.0
    for level in sw.noise_levels:
        errs = np.zeros((sw.n_models, len(sw.s_grid)))
        for m in range(sw.n_models):
            spec = random_pivot_tree_spec(_aux(seed, _SWEEP, m), v, f, d, noise=level)
            model = build_pivot_tree(spec)
            points = model.joint.sample(_aux(seed, _SWEEP, m, 1), sw.n_points)
            row, col, entry, joint_pivot, _ = pivot_scores(model, spec.pivot, points)
            exact = compose_scores_thm1(row, col, entry)
            indep_spec = random_pivot_tree_spec(_aux(seed, _SWEEP, m), v, f, d, noise=level, coeff_scale=0.0)
            indep = build_pivot_tree(indep_spec)
            ipoints = indep.joint.sample(_aux(seed, _SWEEP, m, 2), sw.n_points)
            irow, icol, ientry, _, _ = pivot_scores(indep, indep_spec.pivot, ipoints)
            iexact = compose_scores_thm1(irow, icol, ientry)
            for k, s in enumerate(sw.s_grid):
                w_row = comp.row_weight(s)
                errs[m, k] = np.max(np.abs(compose_scores_convex(row, col, w_row) - exact))
                # the other orientation at 1 - s must land on the same weights
                w_swapped = swapped.row_weight(1.0 - s)
                err_swapped = np.max(np.abs(compose_scores_convex(row, col, w_swapped) - exact))
                swap_diff = max(swap_diff, float(abs(err_swapped - errs[m, k])))
                swap_scale = max(swap_scale, float(errs[m, k]))
                indep = compose_scores_convex(irow, icol, w_row)
                indep_max = max(indep_max, float(np.max(np.abs(indep - iexact))))
        for k, s in enumerate(sw.s_grid):
            curve.append({"noise": level, "s": s, "max_error": float(errs[:, k].max()),
                          "mean_error": float(errs[:, k].mean())})
            report.add(f"convex_error_noise{level:g}_s{s:g}", errs[:, k].max())
    report.check("independent_max_error", indep_max, indep_max <= sw.independent_tolerance,
                 f"<= {sw.independent_tolerance:g}")
    # the other orientation at 1 - s carries weight 1 - (1 - s), which is s
    # up to one rounding when s < 0.5; allow only that rounding
    swap_tol = 4.0 * np.finfo(float).eps * max(swap_scale, 1.0)
    report.check("orientation_swap_max_diff", swap_diff, swap_diff <= swap_tol,
                 "<= 4 ulp (rounding of 1 - s)")
    report.details = {"curve": curve}
    return report


# -- conditioning ---------------------------------------------------------------


def coupled_pivot_tree(shape, coupling) -> MatrixGaussianModel:
    """Positively coupled pivot tree rooted at (0, 0)."""
    v, f, d = shape
    eye = np.eye(d)
    spec = PivotTreeSpec(v, f, d, (0, 0), GaussianModel(np.zeros(d), coupling.pivot_var * eye))
    for j in range(1, f):
        spec.row_coeffs[j] = coupling.coefficient * eye
    for i in range(1, v):
        spec.col_coeffs[i] = coupling.coefficient * eye
    for i in range(v):
        for j in range(f):
            if (i, j) != (0, 0):
                spec.noise_covs[(i, j)] = coupling.innovation_var * eye
            if i > 0 and j > 0:
                spec.rest_coeffs[(i, j)] = coupling.coefficient * eye
    return build_pivot_tree(spec)


def run_condition_check(cfg: ExperimentConfig, seed: int) -> RunReport:
    cc = cfg.condition
    shape = tuple(cc.shape)
    v, f, d = shape
    report = RunReport("condition-check", seed, cfg.config_hash)
    model = coupled_pivot_tree(shape, cc.coupling)
    rows, cols, _ = oracle_denoisers(model)
    schedule = cfg.schedule.build()
    comp = cfg.composition.build()

    # first row and column conditioned on fresh model draws, one per run
    seeds = derive_seeds(seed, _CONDITION, cc.n_runs)
    exact = True
    for k, sd in enumerate(seeds):
        clean = model.sample(_aux(seed, _CONDITION, k))
        conds = ConditionSet.first_row_and_column(clean)
        out, _ = sample_matrix_batch(rows, cols, schedule, comp, conds, [sd], shape=shape)
        exact &= all(np.array_equal(out[0][e], val) for e, val in conds.entries.items())
    report.check("conditioned_entries_bit_exact", float(exact), exact, f"all {cc.n_runs} runs")

    # everything conditioned
    clean = model.sample(_aux(seed, _CONDITION, 10**6))
    full = ConditionSet({(i, j): clean[i, j] for i in range(v) for j in range(f)})
    out, _ = sample_matrix_batch(rows, cols, schedule, comp, full, seeds[:1], shape=shape)
    verbatim = bool(np.array_equal(out[0], clean))
    report.check("fully_conditioned_verbatim", float(verbatim), verbatim, "bit-exact")

    # empty condition set against an independent unconditional reference
    run_seeds = derive_seeds(seed, _CONDITION + 100, cc.n_energy)
    ref_seeds = derive_seeds(seed, _CONDITION + 200, cc.n_energy)
    empty_out, _ = sample_matrix_batch(rows, cols, schedule, comp, ConditionSet(), run_seeds, shape=shape)
    ref_out, _ = sample_matrix_batch(rows, cols, schedule, comp, None, ref_seeds, shape=shape)
    stat, p, _ = stats.energy_permutation_test(
        empty_out.reshape(cc.n_energy, -1), ref_out.reshape(cc.n_energy, -1), cc.n_permutations,
        _aux(seed, _STATS, 1),
    )
    report.add("unconditioned_energy_distance", stat)
    report.check("unconditioned_energy_pvalue", p, p > cc.alpha, f"> {cc.alpha:g}")

    # coupling: pivot condition against the adjacent interior output
    corr_seeds = derive_seeds(seed, _CONDITION + 300, cc.n_correlation)
    cleans = model.sample(_aux(seed, _CONDITION, 2 * 10**6), cc.n_correlation)
    outs = np.empty_like(cleans)
    # conditions differ per seed, so batch in groups sharing one condition set
    for k, sd in enumerate(corr_seeds):
        conds = ConditionSet.first_row_and_column(cleans[k])
        outs[k] = sample_matrix_batch(rows, cols, schedule, comp, conds, [sd], shape=shape)[0][0]
    if v > 1 and f > 1:
        corr = float(np.corrcoef(cleans[:, 0, 0, 0], outs[:, 1, 1, 0])[0, 1])
        report.check("pivot_to_interior_correlation", corr, corr > 0.0, "> 0")
        anchor = float(np.corrcoef(cleans[:, 1, 0, 0], outs[:, 1, 1, 0])[0, 1])
        report.add("column_anchor_to_interior_correlation", anchor)
    return report


# -- plain sampling ---------------------------------------------------------------


def build_sample_setup(cfg: ExperimentConfig, seed: int):
    sc = cfg.sample
    if sc.model == "gmm_pair":
        if sc.gmm_row is None or sc.gmm_col is None:
            raise ValueError("sample.model gmm_pair needs sample.gmm_row and sample.gmm_col")
        row, col = GmmDenoiser(gmm_from_dict(sc.gmm_row)), GmmDenoiser(gmm_from_dict(sc.gmm_col))
        shape = tuple(sc.shape)
        if row.dim != shape[1] * shape[2] or col.dim != shape[0] * shape[2]:
            raise ValueError("gmm dimensions disagree with sample.shape")
        return row, col, None, None, shape
    if sc.pivot_tree is not None:
        spec = pivot_tree_from_dict(sc.pivot_tree)
        model = build_pivot_tree(spec)
    else:
        model = coupled_pivot_tree(tuple(sc.shape), sc.coupling)
    shape = (model.v, model.f, model.entry_dim)
    if list(shape) != list(sc.shape):
        raise ValueError(f"pivot tree shape {shape} disagrees with sample.shape {sc.shape}")
    rows, cols, entries = oracle_denoisers(model)
    return rows, cols, entries, model, shape


def run_sample(cfg: ExperimentConfig, seed: int, snapshots: bool = False):
    sc = cfg.sample
    rows, cols, entries, model, shape = build_sample_setup(cfg, seed)
    comp = cfg.composition.build()
    schedule = cfg.schedule.build()
    conds = None
    if sc.condition_first_row_column:
        if model is None:
            raise ValueError("conditioning needs a pivot_tree model to draw the conditions from")
        conds = ConditionSet.first_row_and_column(model.sample(_aux(seed, _SAMPLE, 0)))
    seeds = derive_seeds(seed, _SAMPLE, sc.n_samples)
    out, run = sample_matrix_batch(rows, cols, schedule, comp, conds, seeds, shape=shape,
                                   entry_denoiser=entries, snapshots=snapshots)
    report = RunReport("sample", seed, cfg.config_hash)
    expected = expected_composed_steps(schedule.n_steps, comp.n_rollback, comp.rollback_repeats)
    report.check("composed_steps", run.composed_steps, run.composed_steps == expected, f"== {expected}")
    per_step = {r.row_calls + r.col_calls for r in run.steps}
    ok = per_step == {shape[0] + shape[1]}
    report.check("denoiser_calls_per_step", max(per_step), ok, f"== V + F = {shape[0] + shape[1]}")
    report.add("sample_mean", out.mean())
    report.add("sample_std", out.std())
    if model is not None:
        report.add("model_std", float(np.sqrt(np.mean(np.diag(model.joint.cov)))))
    report.instrumentation = {"steps": run.records()}
    report.details = {"seeds": seeds}
    return report, out, run, seeds


def independent_gaussian_matrix(shape, rng: np.random.Generator) -> MatrixGaussianModel:
    v, f, d = shape
    models = {}
    for i in range(v):
        for j in range(f):
            a = rng.standard_normal((d, d))
            models[(i, j)] = GaussianModel(rng.standard_normal(d), a @ a.T / d + 0.5 * np.eye(d))
    return independent_matrix_model(models, v, f)
