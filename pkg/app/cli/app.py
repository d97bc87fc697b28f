import logging
import sys
from collections.abc import Iterator
from contextlib import contextmanager
from enum import StrEnum
from pathlib import Path
from typing import Annotated

import typer

from app.core.config import Config
from app.core.constants import DEFAULT_KEY_SEED, TABLE_SEEDS, WLAN
from app.core.schemas import LookupTable, PhyProfile, SweepSpec, ThresholdStore
from app.services.mapping import load_bundled_table, load_table, map_ber_to_snr
from app.services.phy import get_profile, load_profiles
from app.services.repository import open_repository
from app.services.scenario import parse_script
from app.services.sweep import run_sweep, snr_range
from app.services.testbench import CalibrationError, calibrate_store, calibrate_value_x
from app.services.workflow import Controller
from app.utils.text import format_event_log, format_number, format_sweep_csv, format_table

logger = logging.getLogger(__name__)


class ThresholdSource(StrEnum):
    PUBLISHED = "published"
    CALIBRATED = "calibrated"


class KeyColumn(StrEnum):
    ESTIMATED = "estimated"
    ACTUAL = "actual"


ProfileOption = Annotated[str, typer.Option("--profile", "-p", help="Network profile id.")]
SeedOption = Annotated[int, typer.Option("--seed", help="Base random seed.")]
FramesOption = Annotated[
    int | None,
    typer.Option("--frames", min=1, help="Frames per window (default: the profile's)."),
]
OutOption = Annotated[
    Path | None, typer.Option("--out", "-o", help="Write data here instead of stdout.")
]
ProfilesOption = Annotated[
    Path | None, typer.Option("--profiles", help="Extra profiles INI layered on the bundled one.")
]
TableOption = Annotated[str | None, typer.Option("--table", help="Bundled table id.")]
TableFileOption = Annotated[
    Path | None, typer.Option("--table-file", help="User table CSV (same header as bundled).")
]


@contextmanager
def _cli_errors() -> Iterator[None]:
    """Rejected input becomes a one-line diagnostic and exit code 1."""
    try:
        yield
    except typer.Exit:
        raise
    except (ValueError, RuntimeError) as err:
        typer.echo(f"Error: {' '.join(str(err).split())}", err=True)
        raise typer.Exit(code=1) from err


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        typer.echo(text, nl=False)
        return
    out.write_bytes(text.encode())
    logger.info(f"Wrote {out}")


def parse_floats(text: str) -> list[float]:
    return [float(token) for token in text.replace(",", " ").split()]


def parse_ints(text: str) -> list[int]:
    return [int(token) for token in text.replace(",", " ").split()]


def _with_frames(profile: PhyProfile, frames: int | None) -> PhyProfile:
    if frames is None:
        return profile
    return profile.model_copy(update={"frames_per_window": frames})


def _resolve_table(
    table: str | None,
    table_file: Path | None,
    default_id: str | None,
    key_column: KeyColumn = KeyColumn.ESTIMATED,
    key_seed: int | None = DEFAULT_KEY_SEED,
) -> LookupTable:
    if table_file is not None:
        return load_table(
            table_file, table_file.stem, key_column=key_column.value, key_seed=key_seed
        )
    table_id = table or default_id
    if table_id is None:
        raise ValueError("No lookup table: pass --table or --table-file")
    return load_bundled_table(table_id, key_column.value, key_seed)


def create_app() -> typer.Typer:
    """Create and configure the command-line application."""
    app = typer.Typer(
        name="excognet",
        help="Re-modulation test bench simulator for vertical handover.",
        no_args_is_help=True,
        add_completion=False,
    )

    @app.callback()
    def configure(
        verbose: Annotated[
            bool, typer.Option("--verbose", "-v", help="Debug logging on stderr.")
        ] = False,
    ) -> None:
        logging.basicConfig(
            level=logging.DEBUG if verbose else Config.LOG_LEVEL,
            stream=sys.stderr,
            format="%(levelname)s %(name)s: %(message)s",
            force=True,
        )

    @app.command()
    def sweep(
        profile: ProfileOption = WLAN,
        snr: Annotated[
            str | None, typer.Option("--snr", help="SNR points in dB, e.g. '1,2,3'.")
        ] = None,
        snr_start: Annotated[float | None, typer.Option("--snr-start")] = None,
        snr_stop: Annotated[float | None, typer.Option("--snr-stop")] = None,
        snr_step: Annotated[float, typer.Option("--snr-step")] = 1.0,
        seeds: Annotated[
            str, typer.Option("--seeds", help="Comma-separated seeds.")
        ] = ",".join(str(s) for s in TABLE_SEEDS),
        frames: FramesOption = None,
        value_x: Annotated[
            float | None, typer.Option("--value-x", help="Override the profile's Value-X.")
        ] = None,
        calibrate_at: Annotated[
            float | None,
            typer.Option(
                "--calibrate-at",
                help="Calibrate Value-X to the genie BER at this SNR before sweeping.",
            ),
        ] = None,
        seed: SeedOption = Config.DEFAULT_SEED,
        workers: Annotated[int, typer.Option("--workers", min=1)] = Config.SWEEP_WORKERS,
        log10: Annotated[
            bool, typer.Option("--log10", help="Add log10(BER) columns.")
        ] = False,
        out: OutOption = None,
        profiles: ProfilesOption = None,
    ) -> None:
        """Actual vs estimated BER over an SNR grid, one row per (snr, seed)."""
        with _cli_errors():
            phy = get_profile(profile, load_profiles(profiles))
            if snr is not None:
                points = parse_floats(snr)
            elif snr_start is not None and snr_stop is not None:
                points = snr_range(snr_start, snr_stop, snr_step)
            else:
                raise ValueError("Give --snr or both --snr-start and --snr-stop")

            threshold = value_x
            if calibrate_at is not None:
                try:
                    threshold = calibrate_value_x(
                        phy, calibrate_at, seed=seed, frames=frames
                    ).value_x
                except CalibrationError as err:
                    logger.warning(f"{err}; using nearest value")
                    threshold = err.value_x

            spec = SweepSpec(
                profile_id=phy.id,
                snr_points=points,
                seeds=parse_ints(seeds),
                frames=frames or phy.frames_per_window,
                out=out,
                value_x=threshold,
                log10=log10,
            )
            rows = run_sweep(spec, phy, workers)
            _emit(format_sweep_csv(rows, log10=spec.log10), spec.out)

    @app.command()
    def run(
        scenario: Annotated[Path, typer.Argument(help="Scenario script.")],
        profile: ProfileOption = WLAN,
        duration: Annotated[
            float, typer.Option("--duration", min=0, help="Simulated seconds.")
        ] = 60.0,
        snr: Annotated[
            float, typer.Option("--snr", help="Initial link SNR in dB.")
        ] = Config.DEFAULT_SNR_DB,
        seed: SeedOption = Config.DEFAULT_SEED,
        frames: FramesOption = None,
        repository: Annotated[
            Path | None, typer.Option("--repository", help="Repository file.")
        ] = None,
        reset_repository: Annotated[
            bool, typer.Option("--reset-repository", help="Start from an empty repository.")
        ] = False,
        thresholds: Annotated[
            ThresholdSource, typer.Option("--thresholds", help="Value-X source.")
        ] = ThresholdSource.CALIBRATED,
        out: OutOption = None,
        profiles: ProfilesOption = None,
    ) -> None:
        """Run the controller over a scenario script and print the event log."""
        with _cli_errors():
            script = parse_script(scenario)
            registry = {
                pid: _with_frames(p, frames) for pid, p in load_profiles(profiles).items()
            }
            get_profile(profile, registry)

            store = ThresholdStore.from_profiles(registry)
            if thresholds is ThresholdSource.CALIBRATED:
                store = calibrate_store(store, registry, seed=seed)

            repo = open_repository(repository)
            if reset_repository:
                repo.reset()

            controller = Controller(registry, store, repo, seed=seed)
            log, _ = controller.run(script, profile, duration, snr)
            _emit(format_event_log(log), out)

    @app.command()
    def calibrate(
        profile: ProfileOption = WLAN,
        snr: Annotated[
            float | None, typer.Option("--snr", help="Probe SNR (default: min_snr_db).")
        ] = None,
        target: Annotated[
            float | None,
            typer.Option("--target", help="Target BER (default: genie BER of the probe)."),
        ] = None,
        seed: SeedOption = Config.DEFAULT_SEED,
        validation_seed: Annotated[
            int | None, typer.Option("--validation-seed", help="Held-out window seed.")
        ] = None,
        frames: FramesOption = None,
        profiles: ProfilesOption = None,
    ) -> None:
        """Search Value-X so the frame-flag rate meets a target BER."""
        with _cli_errors():
            phy = get_profile(profile, load_profiles(profiles))
            snr_db = phy.min_snr_db if snr is None else snr
            try:
                result = calibrate_value_x(
                    phy,
                    snr_db,
                    target,
                    seed=seed,
                    validation_seed=validation_seed,
                    frames=frames,
                )
            except CalibrationError as err:
                typer.echo(f"Error: {err}", err=True)
                typer.echo(
                    f"nearest_value_x={format_number(err.value_x)} "
                    f"achieved_ber={format_number(err.achieved_ber)} "
                    f"residual={format_number(err.residual)}",
                    err=True,
                )
                raise typer.Exit(code=1) from err

            for key, value in result.model_dump().items():
                if value is None:
                    continue
                text = format_number(value) if isinstance(value, float) else str(value)
                typer.echo(f"{key}={text}")

    @app.command("map")
    def map_command(
        est_ber: Annotated[float, typer.Argument(help="Estimated BER in [0, 1].")],
        profile: ProfileOption = WLAN,
        table: TableOption = None,
        table_file: TableFileOption = None,
        key_column: Annotated[
            KeyColumn, typer.Option("--key-column")
        ] = KeyColumn.ESTIMATED,
        key_seed: Annotated[
            str, typer.Option("--key-seed", help="Seed column, or 'mean' over seeds.")
        ] = str(DEFAULT_KEY_SEED),
        profiles: ProfilesOption = None,
    ) -> None:
        """MAP an estimated BER to the SNR of the closest table row."""
        with _cli_errors():
            default_id = None
            if table is None and table_file is None:
                default_id = get_profile(profile, load_profiles(profiles)).lookup_table_id
            lookup = _resolve_table(
                table,
                table_file,
                default_id,
                key_column,
                None if key_seed == "mean" else int(key_seed),
            )
            typer.echo(format_number(map_ber_to_snr(est_ber, lookup)))

    @app.command("table")
    def table_command(
        table: TableOption = WLAN,
        table_file: TableFileOption = None,
        out: OutOption = None,
    ) -> None:
        """Pretty-print a bundled or user lookup table."""
        with _cli_errors():
            _emit(format_table(_resolve_table(table, table_file, None)), out)

    return app
