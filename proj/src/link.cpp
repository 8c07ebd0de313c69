#include "beamtrack/link.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace beamtrack {

PacketResult packet_success(const ChannelSnapshot& snapshot, double phi_bar_a, double phi_bar_d,
                            int n_rx, int n_tx, double noise_variance, double threshold_db,
                            double spacing) {
  if (noise_variance < 0.0) throw std::invalid_argument("packet_success: noise_variance must be >= 0");
  cplx signal{0.0, 0.0};
  for (const auto& p : snapshot.paths) {
    signal += p.gain * beam_gain(p.aoa, phi_bar_a, n_rx, spacing) *
              std::conj(beam_gain(p.aod, phi_bar_d, n_tx, spacing));
  }
  const double power = std::norm(signal);
  PacketResult result;
  if (power == 0.0) {
    result.snr_db = -std::numeric_limits<double>::infinity();
    result.success = false;
    return result;
  }
  if (noise_variance == 0.0) {
    result.snr_db = std::numeric_limits<double>::infinity();
    result.success = true;
    return result;
  }
  result.snr_db = 10.0 * std::log10(power / noise_variance);
  result.success = result.snr_db >= threshold_db;
  return result;
}

DelayLedger record(DelayLedger ledger, const SlotOutcome& outcome) {
  ledger.total_delay_slots += 1;
  switch (outcome.kind) {
    case SlotKind::tracking:
      ledger.tracking_slots += 1;
      break;
    case SlotKind::success:
      ledger.successful_packets += 1;
      break;
    case SlotKind::failure:
      ledger.failed_slots += 1;
      break;
  }
  return ledger;
}

double average_delay_ms(const DelayLedger& ledger, double slot_duration) {
  if (ledger.successful_packets <= 0) {
    throw std::domain_error("average_delay_ms: no successful packets");
  }
  return double(ledger.total_delay_slots) / double(ledger.successful_packets) * slot_duration * 1e3;
}

}  // namespace beamtrack
