import logging
from unittest.mock import patch

from sos_staircase import logger as log


def test_subsystems_have_own_channels():
    names = {actor: channel.name for actor, (channel, _) in log.CHANNELS.items()}
    assert names == {"solver": "Solver", "staircase": "Staircase", "certificates": "Certificates", "relaxation": "Relaxation"}
    assert all(not channel.propagate for channel, _ in log.CHANNELS.values())


def test_log_warning_goes_to_subsystem_channel():
    channel, mark = log.CHANNELS["solver"]
    with patch.object(channel, "log") as record:
        log.log_warning("solver", "REGULARIZE", "size=3")
    record.assert_called_once_with(logging.WARNING, f"{mark} REGULARIZE | size=3")


def test_unknown_actor_falls_back_to_system():
    with patch.object(log.system_logger, "log") as record:
        log.log_action("SYSTEM_CLI", "TABLE", "rows=1")
    assert record.call_args.args == (logging.INFO, "⚙️ TABLE | rows=1")


def test_system_channel_echoes_warnings_to_stderr():
    streams = [h for h in log.system_logger.handlers if type(h) is logging.StreamHandler]
    assert len(streams) == 1
    assert streams[0].level == logging.WARNING


def test_log_exception_keeps_run_info():
    try:
        raise ValueError("bad pivot")
    except ValueError as exc:
        with patch.object(log.error_logger, "error") as record:
            log.log_exception("staircase_bisection", exc, run_info="d=2 bits=256")
    message = record.call_args.args[0]
    assert "Run: d=2 bits=256" in message
    assert "ValueError: bad pivot" in message
