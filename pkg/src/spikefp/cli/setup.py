# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import argparse
import multiprocessing as mp
import os
import pathlib
import textwrap
from importlib.metadata import distribution, version
from typing import Any, Callable, Dict, List, Tuple

SCAN_KINDS = ("beta", "noise", "threshold", "fpnoise", "depth", "encoding")


class UsageError(ValueError):
    """
    Raised by subcommands when the user input cannot be processed. Mapped to exit status 2.
    """


def parse_args(cli_args: List[str]) -> Tuple[str, Any, str]:
    parser = _make_cli()

    if _process_custom_flags(cli_args):
        return "help", {}, "error"

    # Parse the input parameters:
    args = _preprocess_args(parser, parser.parse_args(cli_args))
    _validate_args(parser, args)

    subcommand = args.pop("subcommand")
    verbosity = args.pop("verbosity")
    return subcommand, args, verbosity


def _process_custom_flags(cli_args: List[str]) -> bool:
    print_cite = False
    print_license = False

    for arg in cli_args:
        if arg == "--cite":
            print_cite = True
        elif arg == "--license":
            print_license = True
        elif arg == "--help" or arg == "-h":
            return False

    if print_cite and print_license:
        raise RuntimeError("spikefp: error: --cite and --license are mutually exclusive")

    if print_cite:
        print(_fetch_reference())
        return True

    if print_license:
        print(_fetch_license())
        return True

    return False


class _CustomFormatter(argparse.RawTextHelpFormatter):
    """
    A custom formatter that enables multiline and bulleted descriptions
    """

    def _fill_text(self, text, width, indent) -> str:
        return text


def _num_cpus(arg: str) -> int:
    try:
        n = int(arg)
        if 0 < n <= mp.cpu_count():
            return n
    except:  # noqa
        pass

    raise argparse.ArgumentTypeError(
        f"Not a valid number of CPU cores (allowed values are integers between 1 and {mp.cpu_count()})"
    )


def _existing_file(arg: str) -> pathlib.Path:
    if (path := pathlib.Path(arg)).is_file():
        return path

    raise argparse.ArgumentTypeError(f'Not an existing file: "{arg}"')


def _non_negative_float(arg) -> float:
    try:
        if (n := float(arg)) >= 0:
            return n
    except ValueError:
        pass

    raise argparse.ArgumentTypeError("Not a non-negative float")


def _positive_int(arg) -> int:
    try:
        if (n := int(arg)) > 0:
            return n
    except ValueError:
        pass

    raise argparse.ArgumentTypeError("Not a positive int")


def _non_negative_int(arg) -> int:
    try:
        if (n := int(arg)) >= 0:
            return n
    except ValueError:
        pass

    raise argparse.ArgumentTypeError("Not a non-negative int")


def _list_of(dtype: Callable, what: str) -> Callable:
    def parse(arg) -> List:
        if isinstance(arg, (list, tuple)):
            return list(arg)
        tokens = [t.strip() for t in str(arg).split(",") if t.strip() != ""]
        if len(tokens) == 0:
            raise argparse.ArgumentTypeError(f"Not a valid list of {what}: list is empty")
        try:
            return [dtype(t) for t in tokens]
        except (ValueError, argparse.ArgumentTypeError):
            raise argparse.ArgumentTypeError(f'Not a valid comma-separated list of {what}: "{arg}"') from None

    return parse


_float_list = _list_of(float, "numbers")
_positive_int_list = _list_of(_positive_int, "positive integers")
_non_negative_int_list = _list_of(_non_negative_int, "non-negative integers")
_name_list = _list_of(lambda t: t.lower(), "names")


def _fetch_license() -> str:
    dist = distribution("spikefp")

    license = dist.read_text("licenses/LICENCE")
    if license is None:
        raise RuntimeError("Unable to read license information")

    return license


def _fetch_reference() -> str:
    bibtex = """
    @software{spikefp,
        author = {{spikefp contributors}},
        title = {{spikefp: bit-exact IEEE-754 arithmetic built from integrate-and-fire neurons}},
        year = {2025},
        license = {MIT},
    }
    """

    return textwrap.dedent(bibtex).strip()


def _add_common_args(sc: argparse.ArgumentParser, with_seed: bool = True, with_json: bool = True):
    if with_seed:
        sc.add_argument(
            "--seed",
            type=_non_negative_int,
            default=0,
            help="Seed from which all random streams are derived (default: %(default)s).",
        )
    if with_json:
        sc.add_argument(
            "--json",
            action="store_true",
            default=False,
            help="Write tables in JSON format instead of CSV.",
        )
        sc.add_argument(
            "-o",
            "--output",
            type=pathlib.Path,
            help="Path where to write the output table.\n"
            "When not provided, the table is written to $SPIKEFP_OUTPUT_DIR (when defined) or printed to stdout.",
        )
    sc.add_argument(
        "--log-file",
        type=pathlib.Path,
        help="Path where to write the log file.",
    )
    sc.add_argument(
        "-f",
        "--force",
        action="store_true",
        default=False,
        help="Overwrite existing file(s).",
    )
    sc.add_argument(
        "--verbosity",
        type=str,
        choices=("debug", "info", "warning", "error", "critical"),
        default="info",
        help="Set verbosity of output to the console (default: %(default)s).",
    )


def _make_spikefp_encode_subcommand(main_parser) -> argparse.ArgumentParser:
    sc: argparse.ArgumentParser = main_parser.add_parser(
        "encode",
        help="Encode a list of floating-point values into a bit-plane file (one spike channel per bit).",
        formatter_class=_CustomFormatter,
    )

    sc.add_argument(
        "input-file",
        type=_existing_file,
        help="Path to a text file with the values to be encoded.\n"
        "Values are separated by commas or whitespace and are given as hex bit patterns (e.g. 0x3F800000).",
    )
    sc.add_argument(
        "output-file",
        type=pathlib.Path,
        help="Path where to write the bit-plane file (.bp).",
    )
    sc.add_argument(
        "--format",
        type=str,
        choices=("fp8", "fp16", "fp32", "fp64"),
        default="fp32",
        help="Precision format of the values (default: %(default)s).",
    )
    sc.add_argument(
        "--decimal",
        action="store_true",
        default=False,
        help="Accept decimal values, which are rounded to the nearest value representable in the given format.",
    )
    _add_common_args(sc, with_seed=False, with_json=False)

    return sc


def _make_spikefp_verify_subcommand(main_parser) -> argparse.ArgumentParser:
    from spikefp.algorithms.fidelity import OPERATORS

    sc: argparse.ArgumentParser = main_parser.add_parser(
        "verify",
        help="Compare the output of a spiking circuit with a host reference and report the ULP distance.",
        formatter_class=_CustomFormatter,
    )

    sc.add_argument(
        "--op",
        type=str,
        choices=tuple(OPERATORS),
        required=True,
        help="Name of the operator to verify.",
    )
    sc.add_argument(
        "--format",
        type=str,
        choices=("fp8", "fp16", "fp32"),
        default="fp32",
        help="Precision format (default: %(default)s).\n"
        "Only the basic arithmetic operators support formats other than fp32.",
    )
    sc.add_argument(
        "--samples",
        type=_positive_int,
        default=1024,
        help="Number of random inputs (rows for row-wise operators) (default: %(default)s).",
    )
    sc.add_argument(
        "--reference",
        type=str,
        choices=("composition", "libm"),
        default="composition",
        help="Host reference used for the comparison (default: %(default)s):\n"
        "- composition: the same sequence of IEEE-754 operations evaluated on the host\n"
        "- libm: fused evaluation of the same function with the host math library",
    )
    sc.add_argument(
        "--no-div-correction",
        action="store_true",
        default=False,
        help="Skip the final correction step of division, reciprocal and square root.",
    )
    _add_common_args(sc)

    return sc


def _make_spikefp_scan_subcommand(main_parser) -> argparse.ArgumentParser:
    sc: argparse.ArgumentParser = main_parser.add_parser(
        "scan",
        help="Run robustness and fidelity scans.",
        formatter_class=_CustomFormatter,
    )

    sc.add_argument(
        "kind",
        type=str,
        choices=SCAN_KINDS,
        help="The kind of scan:\n"
        "- beta: membrane leak factor\n"
        "- noise: Gaussian noise on the membrane potential\n"
        "- threshold: process deviations of thresholds, biases and weights\n"
        "- fpnoise: bit flips on the operands of floating-point circuits\n"
        "- depth: ULP error of stacked transformer blocks\n"
        "- encoding: reconstruction error of spike encodings",
    )
    sc.add_argument(
        "--config",
        type=_existing_file,
        help='Path to a file with "key = value" lines providing defaults for the options of this subcommand\n'
        "(e.g. trials = 20). Options given on the command line take precedence.",
    )
    sc.add_argument(
        "--targets",
        type=_name_list,
        help="Comma-separated list of circuits under test, or all.\n"
        "Gates and integer circuits: and, or, xor, not, mux, adder4, mult4x4, shifter, shifter28.\n"
        "Floating-point circuits: fp<8|16|32>_<add|sub|mul|div> (e.g. fp8_add).",
    )
    sc.add_argument(
        "--values",
        type=_float_list,
        help="Comma-separated list of values taken by the scanned parameter.",
    )
    sc.add_argument(
        "--trials",
        type=_positive_int,
        help="Number of independent repetitions for each value.",
    )
    sc.add_argument(
        "--repeats",
        type=_positive_int,
        help="Number of times the exhaustive input set of a gate is repeated within a trial.",
    )
    sc.add_argument(
        "--samples",
        type=_positive_int,
        help="Number of random operands per trial (circuits without an exhaustive input set).",
    )
    sc.add_argument(
        "--background-sigma",
        type=_non_negative_float,
        help="Membrane noise floor present during noise and threshold scans (default: 0.13).",
    )
    sc.add_argument(
        "--deviation",
        type=str,
        choices=("gaussian", "uniform"),
        help="How threshold scans perturb neurons:\n"
        "- gaussian: the threshold, bias and weights of every circuit instance are scaled by 1 + delta * N(0, 1)\n"
        "- uniform: the threshold of every neuron is drawn uniformly in [-delta, delta]",
    )
    sc.add_argument(
        "--worst-case",
        type=str,
        choices=("+", "-"),
        help="Shift every threshold by +delta or -delta instead of drawing random deviations.",
    )
    sc.add_argument(
        "--blocks",
        type=_positive_int_list,
        help="Comma-separated list of depths compared by the depth scan.",
    )
    sc.add_argument(
        "--batch",
        type=_positive_int,
        help="Number of independent input sequences evaluated by the depth scan (default: 16).",
    )
    sc.add_argument(
        "--engine",
        type=str,
        choices=("circuit", "oracle"),
        help="How the depth scan evaluates transformer blocks:\n"
        "- circuit: spiking circuits\n"
        "- oracle: the same-order host reference (bit-identical to the circuits and much faster)",
    )
    sc.add_argument(
        "--weights",
        type=_existing_file,
        help="Path to a JSON file with the weights of the transformer blocks used by the depth scan.",
    )
    sc.add_argument(
        "--schemes",
        type=_name_list,
        help="Comma-separated list of encoding schemes (spatial, spatial_truncated, rate, ttfs).",
    )
    sc.add_argument(
        "--steps",
        type=_non_negative_int_list,
        help="Comma-separated list of time steps (rate, ttfs) or channels (spatial_truncated).",
    )
    sc.add_argument(
        "-n",
        "--num-values",
        type=_positive_int,
        help="Number of values encoded in each trial of the encoding scan.",
    )
    sc.add_argument(
        "-p",
        "--nproc",
        type=_num_cpus,
        default=1,
        help="Maximum number of parallel processes to use (default: %(default)s).",
    )
    _add_common_args(sc)

    return sc


def _make_spikefp_energy_subcommand(main_parser) -> argparse.ArgumentParser:
    sc: argparse.ArgumentParser = main_parser.add_parser(
        "energy",
        help="Tabulate neuron counts, spikes and energy of the spiking circuits.",
        formatter_class=_CustomFormatter,
    )

    sc.add_argument(
        "--mode",
        type=str,
        choices=("measured", "expected"),
        default="measured",
        help="How spikes are counted (default: %(default)s):\n"
        "- measured: spikes fired while evaluating the circuits on a seeded workload\n"
        "- expected: half of the neurons fire",
    )
    sc.add_argument(
        "--components",
        type=_name_list,
        help="Comma-separated list of components to include (default: all).",
    )
    sc.add_argument(
        "--evaluations",
        type=_positive_int,
        default=256,
        help="Number of evaluations of each component in measured mode (default: %(default)s).",
    )
    sc.add_argument(
        "--baseline",
        type=_existing_file,
        help='Path to a file with "component = energy_nj" lines overriding the shipped GPU baseline.',
    )
    _add_common_args(sc)

    return sc


def _make_cli() -> argparse.ArgumentParser:
    cli = argparse.ArgumentParser(
        description="spikefp builds bit-exact IEEE-754 arithmetic and neural-network layers out of "
        "integrate-and-fire neuron gates, and measures their fidelity, robustness and energy.",
        usage="spikefp {encode,verify,scan,energy} ...",
        formatter_class=_CustomFormatter,
        allow_abbrev=False,
    )

    cli.add_argument(
        "--license",
        action="store_true",
        default=False,
        help="Print spikefp's license and return.",
    )

    cli.add_argument(
        "--cite",
        action="store_true",
        default=False,
        help="Print spikefp's reference and return.",
    )

    sub_parser = cli.add_subparsers(
        title="subcommands", dest="subcommand", required=True, help="List of available subcommands:"
    )

    _make_spikefp_encode_subcommand(sub_parser)
    _make_spikefp_verify_subcommand(sub_parser)
    _make_spikefp_scan_subcommand(sub_parser)
    _make_spikefp_energy_subcommand(sub_parser)

    cli.add_argument(
        "-v",
        "--version",
        action="version",
        version="%(prog)s {version}".format(version=version("spikefp")),
    )

    return cli


# type, default value and scan kinds accepting each option
_SCAN_OPTIONS: Dict[str, Tuple[Callable, Any, Tuple[str, ...]]] = {
    "targets": (_name_list, None, ("beta", "noise", "threshold", "fpnoise")),
    "values": (_float_list, None, ("beta", "noise", "threshold", "fpnoise")),
    "trials": (_positive_int, None, ("beta", "noise", "threshold", "fpnoise", "encoding")),
    "repeats": (_positive_int, 250, ("beta", "noise", "threshold", "fpnoise")),
    "samples": (_positive_int, 1000, ("beta", "noise", "threshold", "fpnoise")),
    "background_sigma": (_non_negative_float, None, ("noise", "threshold")),
    "deviation": (str, "gaussian", ("threshold",)),
    "worst_case": (str, None, ("threshold",)),
    "blocks": (_positive_int_list, [1, 2, 4, 8], ("depth",)),
    "batch": (_positive_int, 16, ("depth",)),
    "engine": (str, "circuit", ("depth",)),
    "weights": (_existing_file, None, ("depth",)),
    "schemes": (_name_list, ["spatial", "spatial_truncated", "rate", "ttfs"], ("encoding",)),
    "steps": (_non_negative_int_list, [16, 32], ("encoding",)),
    "num_values": (_positive_int, 1000, ("encoding",)),
}

# per-kind defaults overriding the generic ones
_SCAN_KIND_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "beta": {"targets": ["all"], "values": [0.1, 0.3, 0.5, 0.7, 0.9, 1.0], "trials": 10},
    "noise": {"targets": ["all"], "values": [0.0, 0.05, 0.1, 0.2, 0.3], "trials": 10},
    "threshold": {"targets": ["and", "or", "xor", "not"], "values": [0.0, 0.05, 0.1, 0.2], "trials": 10},
    "fpnoise": {"targets": ["fp8_add", "fp16_add", "fp32_add"], "values": [0.0, 0.01, 0.05, 0.1], "trials": 10},
    "encoding": {"trials": 5},
}

_SCAN_CHOICES = {
    "deviation": ("gaussian", "uniform"),
    "worst_case": ("+", "-"),
    "engine": ("circuit", "oracle"),
}


def _load_scan_config(parser: argparse.ArgumentParser, path: pathlib.Path, kind: str) -> Dict[str, Any]:
    from spikefp.utils import parse_key_value

    try:
        entries = parse_key_value(pathlib.Path(path).read_text())
    except (OSError, UnicodeDecodeError, ValueError) as e:
        parser.error(f'invalid config file "{path}": {e}')

    config = {}
    for key, value in entries.items():
        key = key.replace("-", "_")
        if key == "n":
            key = "num_values"
        if key not in _SCAN_OPTIONS:
            parser.error(f'invalid config file "{path}": unknown option "{key}"')
        dtype, _, kinds = _SCAN_OPTIONS[key]
        if kind not in kinds:
            parser.error(f'invalid config file "{path}": option "{key}" does not apply to {kind} scans')
        if key in _SCAN_CHOICES and value not in _SCAN_CHOICES[key]:
            parser.error(f'invalid config file "{path}": invalid value for "{key}": "{value}"')
        try:
            config[key] = dtype(value)
        except (argparse.ArgumentTypeError, ValueError) as e:
            parser.error(f'invalid config file "{path}": invalid value for "{key}": {e}')

    return config


def _define_scan_args(parser: argparse.ArgumentParser, args: Dict[str, Any]) -> Dict[str, Any]:
    kind = args["kind"]
    for key, (_, _, kinds) in _SCAN_OPTIONS.items():
        if key in args and kind not in kinds:
            parser.error(f"--{key.replace('_', '-')} does not apply to {kind} scans")

    config = {}
    if "config" in args:
        config = _load_scan_config(parser, args.pop("config"), kind)

    for key, (_, default, kinds) in _SCAN_OPTIONS.items():
        if kind not in kinds or key in args:
            continue
        if key in config:
            args[key] = config[key]
            continue
        default = _SCAN_KIND_DEFAULTS.get(kind, {}).get(key, default)
        if default is not None:
            args[key] = default

    return args


def _normalize_args(args: Dict[str, Any]) -> Dict[str, Any]:
    return {k.replace("-", "_"): v for k, v in args.items() if v is not None}


def _default_output_name(args: Dict[str, Any]) -> str:
    subcommand = args["subcommand"]
    if subcommand == "verify":
        name = f"verify_{args['op']}_{args['format']}"
    elif subcommand == "scan":
        name = f"scan_{args['kind']}"
    else:
        name = f"energy_{args['mode']}"

    return f"{name}.json" if args.get("json") else f"{name}.csv"


def _define_default_args(parser: argparse.ArgumentParser, args: Dict[str, Any]) -> Dict[str, Any]:
    if args["subcommand"] == "scan":
        args = _define_scan_args(parser, args)

    if args["subcommand"] in {"verify", "scan", "energy"} and "output" not in args:
        output_dir = os.environ.get("SPIKEFP_OUTPUT_DIR", "").strip()
        if output_dir != "":
            args["output"] = pathlib.Path(output_dir) / _default_output_name(args)

    return args


def _preprocess_args(parser: argparse.ArgumentParser, args: argparse.Namespace) -> Dict[str, Any]:
    args = vars(args)
    args_to_drop = ("license", "cite")
    for arg in args_to_drop:
        args.pop(arg, None)

    args = _normalize_args(args)
    return _define_default_args(parser, args)


def _validate_output_paths(parser: argparse.ArgumentParser, args: Dict[str, Any], *keys: str):
    if args["force"]:
        return

    path_collisions = []
    for key in keys:
        path = args.get(key)
        if path is not None and path.exists():
            path_collisions.append(f'refusing to overwrite existing file "{path}"')

    num_collisions = len(path_collisions)
    if num_collisions == 1:
        parser.error(f"{path_collisions[0]}\n" "Pass --force to overwrite.")
    elif num_collisions > 1:
        path_collisions = "\n - ".join(path_collisions)
        parser.error(
            f"encountered the following {num_collisions} path collisions:\n"
            f" - {path_collisions}\n"
            "Pass --force to overwrite."
        )


def _validate_spikefp_verify_args(parser: argparse.ArgumentParser, args: Dict[str, Any]):
    from spikefp.algorithms.fidelity import get_operator
    from spikefp.data_structures import PrecisionFormat

    op = get_operator(args["op"])
    if PrecisionFormat.from_name(args["format"]) not in op.formats:
        supported = ", ".join(fmt.value for fmt in op.formats)
        parser.error(f"--op {op.name} does not support --format {args['format']} (supported formats: {supported})")


def _validate_spikefp_scan_args(parser: argparse.ArgumentParser, args: Dict[str, Any]):
    from spikefp.algorithms.fidelity import ENCODING_SCHEMES
    from spikefp.algorithms.robustness import get_target, is_fp_target

    kind = args["kind"]
    if kind in {"beta", "noise", "threshold", "fpnoise"}:
        targets = args["targets"]
        if "all" in targets and len(targets) != 1:
            parser.error('--targets all cannot be combined with other targets')
        for t in targets:
            if t == "all":
                continue
            try:
                get_target(t)
            except ValueError as e:
                parser.error(str(e))
            if (kind == "fpnoise") != is_fp_target(t):
                kind_of_target = "floating-point" if kind == "fpnoise" else "gate or integer"
                parser.error(f'{kind} scans only accept {kind_of_target} targets (found "{t}")')

    if kind == "encoding":
        for s in args["schemes"]:
            if s not in ENCODING_SCHEMES:
                parser.error(f'unknown encoding scheme "{s}": choose one of {", ".join(ENCODING_SCHEMES)}')
        if "spatial_truncated" in args["schemes"] and max(args["steps"]) > 32:
            parser.error("spatial_truncated keeps at most 32 channels: --steps values must be between 0 and 32")


def _validate_args(parser: argparse.ArgumentParser, args: Dict[str, Any]):
    subcommand = args["subcommand"]
    if subcommand == "encode":
        _validate_output_paths(parser, args, "output_file", "log_file")
        return

    _validate_output_paths(parser, args, "output", "log_file")
    if subcommand == "verify":
        _validate_spikefp_verify_args(parser, args)
    elif subcommand == "scan":
        _validate_spikefp_scan_args(parser, args)
