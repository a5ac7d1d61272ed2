"""Command line: batch scenarios, latency report, selftest, live service."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import _kernel, controller


def _cmd_run(args) -> int:
    from . import scenario as scenario_mod

    scn = scenario_mod.load_scenario(args.scenario)
    if args.time_scale is not None:
        scn.time_scale_factor = args.time_scale
        scn.__post_init__()
    out_dir = Path(args.out_dir)
    report = scenario_mod.run_scenario(scn, out_dir)
    print(f"wrote {out_dir / scn.raster_name}, {out_dir / scn.poses_name}, "
          f"{out_dir / scn.report_name}")
    for switch in report.data["switches"]:
        state = "saturated" if switch["saturated"] else f"{switch['convergence_ticks']} ms"
        print(f"  {switch['target']:>5s} @ {switch['tick']:>6d}: convergence {state} "
              f"(reference {switch['reference_ms']} ms)")
    speed = report.data["speed_cm_s"]
    if speed is not None:
        print(f"  speed: {speed:.3f} cm/s")
    return 0


def _cmd_latency_report(args) -> int:
    print(json.dumps(controller.latency_report(), indent=2))
    return 0


def _cmd_selftest(args) -> int:
    from . import aer, cpg

    failures = 0

    def check(name: str, ok: bool) -> None:
        nonlocal failures
        print(f"  {'PASS' if ok else 'FAIL'}  {name}")
        failures += 0 if ok else 1

    ok = all(
        aer.decode_frame(aer.encode_event(aer.AerEvent(a))).addr == a
        for a in range(65536)
    )
    check("2-of-7 codec round trip over all 65536 addresses", ok)

    ok = all(
        controller.decode_event(a) == controller.DecodedCommand(a % 12, controller.Action.FW if a < 12 else controller.Action.BW)
        for a in range(24)
    )
    check("address decode table 0..23", ok)

    total_cycles, total_ns = controller.path_latency()
    check("pipeline delay totals (166 cycles, 3457.78 ns)",
          total_cycles == 166 and total_ns == 3457.78)

    net, layout = cpg.build_cpg_network()
    train = net.run([cpg.gait_stimulus(cpg.GaitId.RUN, 0, layout)], 400)
    motor, _ = cpg.motor_events(train, layout)
    check("run-gait generation classifies as run",
          cpg.classify_window(motor, (100, 300)) == cpg.GaitId.RUN)

    check("silent without stimulus", net.run([], 2000) == [])

    print(f"selftest: {'OK' if failures == 0 else f'{failures} failure(s)'} "
          f"(kernel backend: {_kernel.BACKEND})")
    return 1 if failures else 0


def _cmd_serve(args) -> int:
    from . import service as service_mod
    from . import cpg as cpg_mod
    from . import hexapod

    cfg = service_mod.ServiceConfig(port=args.port, time_scale_factor=args.time_scale)
    if args.config:
        import yaml

        with open(args.config) as fh:
            data = yaml.safe_load(fh) or {}
        cfg.cpg = cpg_mod.cpg_config_from_dict(data.get("cpg") or {})
        cfg.geometry = hexapod.geometry_from_dict(data.get("hexapod") or {})
        if "time_scale_factor" in data and args.time_scale == 100:
            cfg.time_scale_factor = int(data["time_scale_factor"])
    service_mod.serve(cfg)
    return 0


def _cmd_bench(args) -> int:
    from . import bench

    report = bench.run_benchmark(args.neurons, args.fan_out, args.ticks)
    print(bench.format_benchmark(report))
    return 0 if report["trains_identical"] else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hexcpg",
        description="Spiking-CPG hexapod simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario file end to end")
    p_run.add_argument("scenario", help="scenario YAML file")
    p_run.add_argument("--out-dir", default="out", help="output directory")
    p_run.add_argument("--seed", type=int, default=None,
                       help="accepted for interface stability; the pipeline is deterministic")
    p_run.add_argument("--time-scale", type=int, default=None,
                       help="override the scenario's time_scale_factor")
    p_run.set_defaults(func=_cmd_run)

    p_lat = sub.add_parser("latency-report", help="print the pipeline delay table as JSON")
    p_lat.set_defaults(func=_cmd_latency_report)

    p_self = sub.add_parser("selftest", help="run quick built-in checks")
    p_self.set_defaults(func=_cmd_selftest)

    p_serve = sub.add_parser("serve", help="run the live control service")
    p_serve.add_argument("--port", type=int, default=8642)
    p_serve.add_argument("--time-scale", type=int, default=100)
    p_serve.add_argument("--config", default=None, help="YAML config overrides")
    p_serve.set_defaults(func=_cmd_serve)

    p_bench = sub.add_parser("bench", help="compare the stepping kernel backends")
    p_bench.add_argument("--neurons", type=int, default=400)
    p_bench.add_argument("--fan-out", type=int, default=20)
    p_bench.add_argument("--ticks", type=int, default=4000)
    p_bench.set_defaults(func=_cmd_bench)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
