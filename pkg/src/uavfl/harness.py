"""Experiment orchestration: scenario build, round loop, metrics, CSV output.

Seed discipline: the master seed feeds purpose-tagged numpy SeedSequences so
that every random stream is independent of the others. Harness tags:
1 placement, 2 batteries, 3 training (per round+UAV), 4 random selection
(per round), 5 diversity sampling (per round+UAV), 6 model init. The data
generator uses its own 10x tags internally. Fixing the master seed makes a
whole run bit-reproducible, independent of the training worker count.
"""

from __future__ import annotations

import dataclasses
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .channel import capacity_downlink, capacity_uplink, channel_gain, link_geometry
from .config import ExperimentConfig
from .cost import RoundCost, charge_round, estimate_round_cost, round_duration
from .datagen import GenSpec, generate_uav_dataset
from .errors import CohortInfeasible, UavFlError
from .learning import (ModelSpec, aggregate, evaluate_matrix, local_train,
                       model_init, samples_to_matrix)
from .selection import Selection, deeps_select, is_feasible, random_select
from .similarity import DiversityScore, SsimParams, dataset_diversity, deduplicate
from .types import (ChannelParams, Dataset, FlTask, PathLossConstants, Position3D,
                    RoundRecord, UavState, validate_scenario)

_TAG_PLACEMENT = 1
_TAG_BATTERY = 2
_TAG_TRAINING = 3
_TAG_SELECTION = 4
_TAG_DIVERSITY = 5
_TAG_MODEL_INIT = 6


@dataclass
class Scenario:
    """Everything a run consumes; clone per run since batteries/datasets mutate."""

    uavs: list[UavState]
    task: FlTask
    channel: ChannelParams
    rate_up: dict[int, float]
    rate_down: dict[int, float]
    model_spec: ModelSpec
    ssim_params: SsimParams
    max_pairs: int
    test_x: np.ndarray
    test_y: np.ndarray

    def fresh_copy(self) -> "Scenario":
        uavs = [dataclasses.replace(
            u,
            dataset=Dataset(samples=list(u.dataset.samples),
                            shard_count=u.dataset.shard_count,
                            dedup_done=False),
        ) for u in self.uavs]
        return dataclasses.replace(self, uavs=uavs)


@dataclass
class RunSummary:
    strategy: str
    ssim_threshold: float | None
    avg_round_time_s: float
    rounds_to_convergence: int
    time_to_convergence_min: float
    final_accuracy: float
    converged: bool
    records: list[RoundRecord]
    initial_battery_total_j: float
    final_battery_total_j: float
    dedup_removed_total: int = 0
    degraded_rounds: int = 0
    aborted_infeasible: bool = False

    @property
    def label(self) -> str:
        if self.strategy == "deeps":
            return f"deeps_th{self.ssim_threshold:g}"
        return self.strategy


def genspec_from_config(config: ExperimentConfig) -> GenSpec:
    """Copy the generator section of a config onto a GenSpec (shared fields)."""
    fields = {f.name for f in dataclasses.fields(GenSpec)}
    values = {k: v for k, v in dataclasses.asdict(config.generator).items()
              if k in fields}
    return GenSpec(**values)


def build_scenario(config: ExperimentConfig) -> Scenario:
    """Generate datasets, place UAVs, derive link rates and the test pool."""
    seed = config.master_seed
    genspec = genspec_from_config(config)
    gen = config.generator
    model_spec = ModelSpec(
        input_dim=gen.image_side * gen.image_side,
        hidden_dim=config.model.hidden_dim,
        learning_rate=config.model.learning_rate,
        batch_size=config.model.batch_size,
        adam_eps=config.model.adam_eps,
    )
    task = FlTask(
        n_rounds_max=config.n_rounds_max,
        cohort_size=config.cohort_size,
        per_subregion_quota=config.per_subregion_quota,
        xi=config.xi,
        ssim_threshold=config.ssim_threshold,
        epochs_per_round=config.cost.epochs_per_round,
        param_count=model_spec.param_count,
        param_size_bits=config.cost.param_size_bits,
    )
    ch = config.channel
    channel = ChannelParams(
        beta0=ch.beta0, noise_psd_w=ch.noise_psd_w, bandwidth_hz=ch.bandwidth_hz,
        bs_tx_power_w=ch.bs_tx_power_w,
        plc=PathLossConstants(a1=ch.a1, a2=ch.a2, a3=ch.a3, a4=ch.a4),
    )

    geo = config.geometry
    bs_pos = Position3D(geo.region_m / 2.0, geo.region_m / 2.0, geo.bs_altitude_m)
    place_rng = np.random.default_rng(np.random.SeedSequence([seed, _TAG_PLACEMENT]))
    battery_rng = np.random.default_rng(np.random.SeedSequence([seed, _TAG_BATTERY]))

    uavs: list[UavState] = []
    test_pool = []
    rate_up: dict[int, float] = {}
    rate_down: dict[int, float] = {}
    for uid in range(1, config.n_uavs + 1):
        subregion = (uid - 1) % config.subregion_count + 1
        x, y = place_rng.uniform(0.0, geo.region_m, size=2)
        battery = float(battery_rng.uniform(config.battery.min_j, config.battery.max_j))
        data = generate_uav_dataset(genspec, subregion, uid, seed,
                                    shard_count=config.n_rounds_max)
        uav = UavState(
            id=uid, subregion_id=subregion,
            position=Position3D(float(x), float(y), geo.uav_altitude_m),
            battery_j=battery, battery_max_j=config.battery.max_j,
            cpu_hz=config.cost.cpu_hz,
            cycles_per_sample=config.cost.cycles_per_sample,
            chip_coeff=config.cost.chip_coeff,
            tx_power_w=config.cost.tx_power_w,
            dataset=data.train,
        )
        h = channel_gain(link_geometry(uav.position, bs_pos), channel)
        rate_up[uid] = capacity_uplink(h, channel, uav)
        rate_down[uid] = capacity_downlink(h, channel)
        test_pool.extend(data.test)
        uavs.append(uav)

    validate_scenario(uavs, task, config.subregion_count)
    test_x, test_y = samples_to_matrix(test_pool, model_spec)
    return Scenario(
        uavs=uavs, task=task, channel=channel, rate_up=rate_up, rate_down=rate_down,
        model_spec=model_spec,
        ssim_params=SsimParams(k1=config.ssim.k1, k2=config.ssim.k2),
        max_pairs=config.ssim.max_pairs,
        test_x=test_x, test_y=test_y,
    )


def _shard_diversity(uav: UavState, round_k: int, scenario: Scenario,
                     master_seed: int) -> DiversityScore:
    shard = uav.dataset.shard(round_k)
    if len(shard) < 2:
        # a 0/1-sample shard carries no evidence of redundancy
        return DiversityScore(mean_pairwise_ssim=0.0, pairs_evaluated=0)
    seed = np.random.SeedSequence([master_seed, _TAG_DIVERSITY, round_k, uav.id])
    return dataset_diversity(shard, scenario.ssim_params,
                             max_pairs=scenario.max_pairs, rng_seed=seed)


def _find_convergence(accuracies: list[float], window: int, tol: float) -> int | None:
    """Earliest 1-based round whose trailing window of accuracies has spread < tol."""
    for k in range(window, len(accuracies) + 1):
        tail = accuracies[k - window:k]
        if max(tail) - min(tail) < tol:
            return k
    return None


def run_experiment(config: ExperimentConfig, scenario: Scenario | None = None,
                   strategy: str | None = None,
                   ssim_threshold: float | None = None) -> RunSummary:
    """Run one full FL simulation; fully deterministic for a fixed master seed."""
    if scenario is None:
        scenario = build_scenario(config)
    else:
        scenario = scenario.fresh_copy()
    strategy = strategy or config.strategy
    ssim_th = config.ssim_threshold if ssim_threshold is None else ssim_threshold
    task = scenario.task if ssim_th == scenario.task.ssim_threshold else \
        dataclasses.replace(scenario.task, ssim_threshold=ssim_th)
    uavs = scenario.uavs
    by_id = {u.id: u for u in uavs}
    seed = config.master_seed

    initial_battery = sum(u.battery_j for u in uavs)
    params = model_init(scenario.model_spec,
                        np.random.SeedSequence([seed, _TAG_MODEL_INIT]))

    records: list[RoundRecord] = []
    accuracies: list[float] = []
    dedup_removed = 0
    degraded_rounds = 0
    aborted = False

    for k in range(1, task.n_rounds_max + 1):
        alive = [u for u in uavs if u.alive]
        costs: dict[int, RoundCost] = {
            u.id: estimate_round_cost(u, task, u.dataset.shard_size(k),
                                      scenario.rate_up[u.id], scenario.rate_down[u.id])
            for u in alive
        }
        dropouts = 0

        if strategy == "deeps":
            diversity = {u.id: _shard_diversity(u, k, scenario, seed) for u in alive}
            sel = deeps_select(uavs, task, k, diversity, costs)
            if sel.degraded_subregions:
                degraded_rounds += 1
            for uid in sorted(sel.ids):
                u = by_id[uid]
                if not u.dataset.dedup_done:
                    dedup_removed += deduplicate(u.dataset, task.ssim_threshold,
                                                 scenario.ssim_params)
                    costs[uid] = estimate_round_cost(
                        u, task, u.dataset.shard_size(k),
                        scenario.rate_up[uid], scenario.rate_down[uid])
        else:
            try:
                sel = random_select(uavs, task, k,
                                    np.random.SeedSequence([seed, _TAG_SELECTION, k]))
            except CohortInfeasible:
                aborted = True
                break

        # participants that can fund the round train on shard k; under the
        # random baseline an unaffordable pick simply drops out mid-round
        jobs = []
        participant_costs: dict[int, RoundCost] = {}
        for uid in sorted(sel.ids):
            u = by_id[uid]
            if not is_feasible(u, costs[uid]):
                u.alive = False
                dropouts += 1
                continue
            shard = u.dataset.shard(k)
            if not shard:
                continue  # nothing to train this round; no time or energy spent
            jobs.append((uid, shard))
            participant_costs[uid] = costs[uid]

        def _train(job):
            uid, shard = job
            train_seed = np.random.SeedSequence([seed, _TAG_TRAINING, k, uid])
            return uid, local_train(params, shard, scenario.model_spec,
                                    task.epochs_per_round, train_seed), len(shard)

        if config.workers > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                results = list(pool.map(_train, jobs))
        else:
            results = [_train(j) for j in jobs]

        cohort_energy = 0.0
        for uid, _, _ in results:
            charge_round(by_id[uid], participant_costs[uid])
            cohort_energy += participant_costs[uid].total_energy_j

        if results:
            params = aggregate([(uid, vec, size) for uid, vec, size in results])
            duration = round_duration([participant_costs[uid] for uid, _, _ in results])
        else:
            duration = 0.0

        acc, loss = evaluate_matrix(params, scenario.test_x, scenario.test_y,
                                    scenario.model_spec)
        accuracies.append(acc)

        # next-round feasibility defines aliveness (positions are static, so
        # the estimate is exact)
        if k < task.n_rounds_max:
            for u in uavs:
                if not u.alive:
                    continue
                nxt = estimate_round_cost(u, task, u.dataset.shard_size(k + 1),
                                          scenario.rate_up[u.id], scenario.rate_down[u.id])
                if not is_feasible(u, nxt):
                    u.alive = False
                    dropouts += 1

        records.append(RoundRecord(
            round_k=k, selected_ids=tuple(sorted(sel.ids)),
            global_accuracy=acc, global_loss=loss,
            round_duration_s=duration, cohort_energy_j=cohort_energy,
            dropouts=dropouts, alive_uavs=sum(u.alive for u in uavs),
        ))

        if config.stop_on_convergence:
            conv = _find_convergence(accuracies, config.convergence_window,
                                     config.convergence_tol)
            if conv is not None:
                break

    conv = _find_convergence(accuracies, config.convergence_window,
                             config.convergence_tol)
    chi_r = conv if conv is not None else len(records)
    durations = [r.round_duration_s for r in records]
    return RunSummary(
        strategy=strategy,
        ssim_threshold=ssim_th if strategy == "deeps" else None,
        avg_round_time_s=float(np.mean(durations)) if durations else 0.0,
        rounds_to_convergence=chi_r,
        time_to_convergence_min=sum(durations[:chi_r]) / 60.0,
        final_accuracy=records[-1].global_accuracy if records else 0.0,
        converged=conv is not None,
        records=records,
        initial_battery_total_j=initial_battery,
        final_battery_total_j=sum(u.battery_j for u in uavs),
        dedup_removed_total=dedup_removed,
        degraded_rounds=degraded_rounds,
        aborted_infeasible=aborted,
    )


# --- emission -----------------------------------------------------------------

CSV_HEADER = "round,accuracy,loss,round_time_s,cohort_energy_j,alive_uavs,dropouts,selected_ids"


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def emit_csv(records: list[RoundRecord], path: str) -> None:
    """Per-round CSV, LF line endings, floats at 6 significant digits."""
    if not records:
        raise UavFlError("no records to emit")
    lines = [CSV_HEADER]
    for r in records:
        lines.append(",".join([
            str(r.round_k), _fmt(r.global_accuracy), _fmt(r.global_loss),
            _fmt(r.round_duration_s), _fmt(r.cohort_energy_j),
            str(r.alive_uavs), str(r.dropouts),
            ";".join(str(i) for i in r.selected_ids),
        ]))
    try:
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise UavFlError(f"cannot write {path}: {exc}") from exc


SUMMARY_HEADER = "strategy,ssim_th,avg_round_time_s,rounds_to_convergence,time_to_convergence_min,final_accuracy,converged"


def emit_summary_csv(summaries: list[RunSummary], path: str) -> None:
    lines = [SUMMARY_HEADER]
    for s in summaries:
        lines.append(",".join([
            s.strategy,
            "" if s.ssim_threshold is None else _fmt(s.ssim_threshold),
            _fmt(s.avg_round_time_s), str(s.rounds_to_convergence),
            _fmt(s.time_to_convergence_min), _fmt(s.final_accuracy),
            str(s.converged).lower(),
        ]))
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def emit_metadata(config: ExperimentConfig, path: str) -> None:
    meta = {
        "master_seed": config.master_seed,
        "config_hash": config.config_hash(),
        "package_version": __version__,
        "config": config.to_dict(),
    }
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def compare_strategies(config: ExperimentConfig,
                       strategies: list[tuple[str, float | None]],
                       out_dir: str | None = None) -> list[RunSummary]:
    """Run every strategy on identical datasets/seeds; emit CSVs and a table."""
    if len(strategies) < 2:
        raise UavFlError("compare needs at least 2 strategies")
    scenario = build_scenario(config)
    summaries = []
    for name, th in strategies:
        summaries.append(run_experiment(config, scenario=scenario,
                                        strategy=name, ssim_threshold=th))
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        for s in summaries:
            emit_csv(s.records, os.path.join(out_dir, f"rounds_{s.label}.csv"))
        emit_summary_csv(summaries, os.path.join(out_dir, "summary.csv"))
        emit_metadata(config, os.path.join(out_dir, "metadata.json"))

    print(f"{'strategy':<14}{'lambda_t (s)':>14}{'chi_r':>8}{'rho_t (min)':>14}{'final acc':>12}")
    for s in summaries:
        name = s.strategy if s.ssim_threshold is None else f"deeps({s.ssim_threshold:g})"
        print(f"{name:<14}{s.avg_round_time_s:>14.2f}{s.rounds_to_convergence:>8}"
              f"{s.time_to_convergence_min:>14.2f}{s.final_accuracy:>12.4f}")
    return summaries
