"""Bell-violation certificate: S value, significance and min-entropy rate."""
import logging
import math

from diqrng.errors import DomainError
from diqrng.models import CLASSICAL_BOUND, TSIRELSON, Certificate, Verdict

logger = logging.getLogger(__name__)

# slack for S values that reach the Tsirelson bound up to rounding
_TSIRELSON_SLACK = 1e-9


class CertifyService:
    def __init__(self, threshold_z=5.0):
        self.threshold_z = float(threshold_z)

    def s_value(self, p_win):
        """CHSH correlator from the game value: S = 8p - 4."""
        if not 0.0 <= p_win <= 1.0:
            raise DomainError(f"win probability must lie in [0, 1], got {p_win}")
        return 8.0 * p_win - 4.0

    def violation_significance(self, p_win, n_total_shots):
        """z-score of the observed win rate against the classical bound."""
        if n_total_shots < 1:
            raise DomainError(f"need at least one shot, got {n_total_shots}")
        if p_win in (0.0, 1.0):
            return math.copysign(math.inf, p_win - CLASSICAL_BOUND)
        return (p_win - CLASSICAL_BOUND) / math.sqrt(p_win * (1.0 - p_win) / n_total_shots)

    def min_entropy_rate(self, s):
        """Certified min-entropy per output bit, 1 - log2(1 + sqrt(2 - S^2/4))."""
        if s < 0.0 or s > TSIRELSON + _TSIRELSON_SLACK:
            raise DomainError(f"S must lie in [0, 2*sqrt(2)], got {s}")
        radicand = max(0.0, 2.0 - s * s / 4.0)
        return max(0.0, 1.0 - math.log2(1.0 + math.sqrt(radicand)))

    def certify_counts(self, wins, total_shots):
        """Certificate for ``wins`` won shots out of ``total_shots``."""
        if total_shots < 1:
            return Certificate(0.0, 0, 0.0, 0.0, 0.0, Verdict.INSUFFICIENT_DATA, self.threshold_z)

        p_win = wins / total_shots
        s = self.s_value(p_win)
        z = self.violation_significance(p_win, total_shots)
        if math.isinf(z):
            # all shots won or all lost: the binomial error estimate is zero
            logger.warning("p_win=%g over %d shots has no finite significance", p_win, total_shots)
            return Certificate(p_win, total_shots, s, z, 0.0, Verdict.INSUFFICIENT_DATA, self.threshold_z)

        if s > TSIRELSON:
            logger.warning("observed S=%.6f exceeds the Tsirelson bound; clamping for the entropy rate", s)
        rate = self.min_entropy_rate(min(max(s, 0.0), TSIRELSON)) if s > 2.0 else 0.0

        if s > 2.0 and z >= self.threshold_z:
            verdict = Verdict.CERTIFIED
        else:
            verdict = Verdict.NOT_VIOLATED
        return Certificate(p_win, total_shots, s, z, rate, verdict, self.threshold_z)

    def certify(self, experiment):
        """Pool every shot of the experiment and certify the pooled win rate."""
        certificate = self.certify_counts(experiment.total_wins, experiment.total_shots)
        logger.info(
            "certificate: p_win=%.5f S=%.5f z=%.2f rate=%.5f -> %s",
            certificate.p_win, certificate.s_value, certificate.z_score,
            certificate.min_entropy_rate, certificate.verdict.value,
        )
        return certificate
