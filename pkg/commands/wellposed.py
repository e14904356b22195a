"""
Interior Transmission Commands
==============================

itp-check  - which sufficient well-posedness conditions hold on a disk
itp-radius - largest disk radius on which some condition holds
"""

from commands.base import Command
from conducta.itp import ITPParameters, coercivity_lower_bound, max_wellposed_radius, check_wellposedness
from conducta.runio import write_json


def _coefficients(parser):
    parser.add_argument("--k", type=float, required=True, help="wavenumber")
    parser.add_argument("--n1", type=float, required=True, help="refractive index of the first medium")
    parser.add_argument("--n2", type=float, required=True, help="refractive index of the second medium")
    parser.add_argument("--eta", type=float, default=0.0, help="boundary coefficient (default: 0)")


class ItpCheckCommand(Command):

    @property
    def name(self):
        return "itp-check"

    @property
    def description(self):
        return "Evaluate the interior transmission well-posedness conditions on a disk"

    def add_arguments(self, parser):
        _coefficients(parser)
        parser.add_argument("--R", type=float, default=1.0, help="disk radius (default: 1)")
        parser.add_argument("--b1", type=float, help="lambda-weighted problem: b1")
        parser.add_argument("--b2", type=float, help="lambda-weighted problem: b2")
        parser.add_argument("--ratio", type=float, help="lambda-weighted problem: inf(lambda1/lambda2)")
        parser.add_argument("--coercivity", action="store_true", help="also compute the subspace coercivity bound")

    def execute(self, args, settings):
        params = ITPParameters(args.k, args.n1, args.n2, args.eta, args.R, args.b1, args.b2, args.ratio)
        report = check_wellposedness(params).to_dict()
        if args.coercivity:
            report["coercivity"] = coercivity_lower_bound(params)
        path = self._output(args, "itp_report.json")
        if path:
            write_json(path, report)
            self._manifest(args, params.to_dict())
        return report


class ItpRadiusCommand(Command):

    @property
    def name(self):
        return "itp-radius"

    @property
    def description(self):
        return "Largest disk radius on which a well-posedness condition holds"

    def add_arguments(self, parser):
        _coefficients(parser)

    def execute(self, args, settings):
        radius = max_wellposed_radius(args.k, args.n1, args.n2, args.eta)
        report = {"k": args.k, "n1": args.n1, "n2": args.n2, "eta": args.eta, "radius": radius}
        path = self._output(args, "itp_radius.json")
        if path:
            write_json(path, report)
            self._manifest(args, report)
        return report
