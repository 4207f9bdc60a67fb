"""
Команда `certify`: сертификат Putinar для x − v на [−1, 1] ∩ {x + (1−ε)x² ≥ 0} в формате "cert-v1".
"""
import argparse

import mpmath

from sos_staircase.cli.common import Command, RunConfig, add_common_arguments, build_config
from sos_staircase.config import settings
from sos_staircase.core.scalar import big, precision
from sos_staircase.exceptions import ConfigError, VerificationFailed
from sos_staircase.logger import log_action
from sos_staircase.models import SosDecomposition
from sos_staircase.services.certificates import (
    certificate_to_json,
    complete_certificate,
    elementary_certificate,
    exactness_certificate,
    gram_polynomial,
    hyperbola_envelope,
    paulynomial,
    rationalize_certificate,
    verify_certificate,
)
from sos_staircase.utils.formatting import emit, json_text


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(Command.CERTIFY.value, help="build, verify and export an SOS certificate")
    add_common_arguments(parser)
    parser.add_argument("--paulynomial", action="store_true", help="use the explicit multiplier s = (x-1)^(2m)")
    parser.add_argument("--rationalize", action="store_true", help="round Gram matrices to exact rationals")
    parser.add_argument("--denom-bound", dest="denom_bound", type=int, default=None)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    if args.epsilon is None or args.orders is None:
        raise ConfigError("certify needs --epsilon and --orders")
    cfg = build_config(Command.CERTIFY, args, format="json")
    if len(cfg.epsilons) != 1 or len(cfg.orders) != 1:
        raise ConfigError("certify takes exactly one epsilon and one order")
    return run(cfg)


def build_certificate(cfg: RunConfig) -> SosDecomposition:
    """paulynomial → достройка; ε = 0 → элементарный; иначе максимальный запас точности."""
    eps, d = cfg.epsilons[0], cfg.orders[0]
    params = cfg.solver_params()
    if cfg.paulynomial:
        m, s = paulynomial(eps, 1)
        return complete_certificate(s, eps, max(d, m + 1), params)
    if eps == 0:
        return elementary_certificate(eps, d)
    return exactness_certificate(eps, d, params)


def run(cfg: RunConfig) -> int:
    cert = build_certificate(cfg)
    if cfg.rationalize:
        cert = rationalize_certificate(cert, cfg.denom_bound, bits=cfg.prec_bits)

    with precision(cfg.prec_bits):
        check = verify_certificate(cert)
        if big(check.residual) > mpmath.mpf(settings.RESIDUAL_TOL) or check.min_gram_eig < -mpmath.mpf(settings.GRAM_EIG_TOL):
            raise VerificationFailed(
                f"certificate check failed: residual {mpmath.nstr(big(check.residual), 5)}, "
                f"min Gram eigenvalue {mpmath.nstr(check.min_gram_eig, 5)}",
                residual=check.residual,
                min_gram_eig=check.min_gram_eig,
            )
        doc = certificate_to_json(cert)
        doc["status"] = "verified"
        doc["rationalized"] = cfg.rationalize
        if cert.v == 0 and cert.epsilon > 0:
            s = gram_polynomial(cert.s)
            doc["hyperbola_envelope"] = hyperbola_envelope(
                s, cert.epsilon, samples=max(64, 2 * (s.degree + 2)), feas_tol=settings.RESIDUAL_TOL,
            )

    emit(json_text(doc), cfg.out)
    log_action("SYSTEM_CLI", "CERTIFY", f"eps={doc['epsilon']} d={cert.order} rationalized={cfg.rationalize}")
    return 0
