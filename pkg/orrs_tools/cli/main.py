import logging
import argparse

from orrs_tools import VERSION
from orrs_tools.cli.config import load_config
from orrs_tools.cli.pipeline import COMMANDS
from orrs_tools.exceptions import OrrsToolsException, ExitCodes


argument_parser = argparse.ArgumentParser(
    prog="orrs-pipeline", description="Predict I/M emissions from roadside remote sensing and screen the fleet."
)
argument_parser.add_argument("command", choices=sorted(COMMANDS), help="The pipeline stage to run.")
argument_parser.add_argument("-c", "--config", type=str, default=None, help="YAML configuration file.")
argument_parser.add_argument(
    "-s", "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
    help="Override a configuration value by dotted key, e.g. learners.gbt.max_depth=5. Repeatable."
)
argument_parser.add_argument("-j", "--workers", type=int, default=None, help="Worker processes (overrides config).")
argument_parser.add_argument("-l", "--log-file", type=str, default="-", help="The file to log to. Default: STDERR.")
argument_parser.add_argument("-v", "--verbose", action="store_true", help="Verbose logging.")
argument_parser.add_argument("-V", "--version", action="version", version="%(prog)s {0}".format(VERSION))

main_logger = logging.getLogger(__name__)


def _install_handler(cmd_args):
    root_logger = logging.getLogger('')
    if cmd_args.log_file == "-":
        handler = logging.StreamHandler()
    else:
        handler = logging.FileHandler(cmd_args.log_file)
    formatter = logging.Formatter(
        "[%(asctime)s] - %(levelname)s - %(message)s - "
        "(%(name)s : %(funcName)s : %(lineno)d : Thread/PID(%(thread)d/%(process)d))"
    )
    handler.setFormatter(formatter)
    root_logger.addHandler(handler)
    if cmd_args.verbose:
        root_logger.setLevel(logging.DEBUG)
    else:
        root_logger.setLevel(logging.INFO)
    return handler


def run_command(cmd_args):
    overrides = list(cmd_args.overrides)
    if cmd_args.workers is not None:
        overrides.append("workers={0}".format(cmd_args.workers))
    cfg = load_config(cmd_args.config, overrides)
    main_logger.info("Running {0} with config {1} into {2}".format(cmd_args.command, cfg.hash[:12], cfg.output_dir))
    written = COMMANDS[cmd_args.command](cfg)
    main_logger.info("{0} wrote {1} files".format(cmd_args.command, len(written)))
    return written


def main(cmd_args=None):
    """Runs one subcommand; returns the process exit code."""
    cmd_args = cmd_args or argument_parser.parse_args()
    handler = _install_handler(cmd_args)
    try:
        run_command(cmd_args)
        return ExitCodes.SUCCESS.value
    except OrrsToolsException as e:
        main_logger.exception("{0} failed: {1}".format(cmd_args.command, e))
        return e.exit_code.value
    except OSError as e:
        main_logger.exception("{0} failed on I/O: {1}".format(cmd_args.command, e))
        return ExitCodes.IO_ERROR.value
    except Exception:
        main_logger.exception("Unhandled exception caught!")
        return ExitCodes.FAILURE.value
    finally:
        logging.getLogger('').removeHandler(handler)
        handler.close()
