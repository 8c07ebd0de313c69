#pragma once

#include "beamtrack/channel.hpp"

namespace beamtrack {

enum class SlotKind { tracking, success, failure };

struct SlotOutcome {
  SlotKind kind = SlotKind::success;
  long slot = 0;
  double snr_db = 0.0;
};

// Slot-level accounting for one episode. Every slot contributes one slot of
// delay; only successful packets amortize it.
struct DelayLedger {
  long total_delay_slots = 0;
  long successful_packets = 0;
  long tracking_slots = 0;
  long failed_slots = 0;
};

struct PacketResult {
  bool success = false;
  double snr_db = 0.0;
};

// Post-beamforming SNR of one data slot against the decoding threshold.
// Deterministic given the snapshot and pointing; noise enters as a variance,
// not a sample.
PacketResult packet_success(const ChannelSnapshot& snapshot, double phi_bar_a, double phi_bar_d,
                            int n_rx, int n_tx, double noise_variance, double threshold_db = 5.0,
                            double spacing = 0.5);

DelayLedger record(DelayLedger ledger, const SlotOutcome& outcome);

// total_delay_slots / successful_packets, expressed in milliseconds.
// Throws std::domain_error when no packet was delivered.
double average_delay_ms(const DelayLedger& ledger, double slot_duration);

}  // namespace beamtrack
