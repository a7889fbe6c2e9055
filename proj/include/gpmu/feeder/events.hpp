#pragma once

#include <array>
#include <vector>

#include "gpmu/feeder/loadflow.hpp"
#include "gpmu/feeder/topology.hpp"
#include "gpmu/numerics/tensor.hpp"
#include "gpmu/rng.hpp"

namespace gpmu::feeder {

// Nine event classes: 1-2 capacitor-bank switching at two locations,
// 3 single-phase load step, 4 three-phase load step, 5-6 motor starts at two
// locations, 7 single-line-to-ground fault, 8 line-to-line fault,
// 9 three-phase fault.
constexpr int kNumClasses = 9;

struct EventSpec {
  int klass = 1;
  int location = 0;  // bus index
  std::array<bool, 3> phases{true, true, true};
  int onset = 0;
  int duration = 0;
  // Signature magnitudes as pu deviations at the event bus.
  double v_step = 0.0;
  double i_step = 0.0;
  double pf_step = 0.0;
  double osc_period = 6.0;
  double osc_tau = 12.0;
  double decay_tau = 20.0;
  double sag_depth = 0.0;
  double surge = 0.0;
  double pf_drop = 0.0;
  double h3_amp = 0.0;
  double h5_amp = 0.0;
  double h_period = 4.0;
  double h_tau = 8.0;
};

struct SynthConfig {
  int window_len = 125;
  double atten_lambda = 0.15;  // deviation scale = exp(-lambda * hops)
  double noise_fund = 0.002;
  double noise_harm = 0.0005;
};

// Harmonic orders measured per bus, in storage order.
constexpr std::array<int, 3> kHarmonicOrders{1, 3, 5};
int harmonic_index(int order);  // 1->0, 3->1, 5->2, else contract error

// Channel layout of every window: V then I then PF, phases A B C within
// each quantity.
constexpr int kChannels = 9;

// Per-class event buses: a canonical spread for the bundled feeder when all
// its buses exist, otherwise a deterministic max-dispersion pick.
std::array<int, kNumClasses> event_locations(const FeederTopology& topo);

EventSpec sample_event_spec(int klass, const FeederTopology& topo,
                            const OperatingPoint& op, int window_len,
                            rng::Stream g);

// Raw measurement windows for every sensor bus (topology sensor order), one
// T x 9 matrix per harmonic order. Deviations attenuate with hop distance
// from the event bus; measurement noise is i.i.d. Gaussian.
std::vector<std::array<Tensor, 3>> synth_event(const FeederTopology& topo,
                                               const OperatingPoint& op,
                                               const EventSpec& spec,
                                               const SynthConfig& cfg,
                                               rng::Stream g);

// Event-free noiseless window for one bus: constant operating-point rows at
// the fundamental, zeros at harmonic orders.
Tensor flat_series(const OperatingPoint& op, int bus, int harmonic,
                   int window_len);

}  // namespace gpmu::feeder
