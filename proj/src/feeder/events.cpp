#include "gpmu/feeder/events.hpp"

#include <algorithm>
#include <cmath>

#include "gpmu/errors.hpp"

namespace gpmu::feeder {

namespace {
constexpr double kPi = 3.14159265358979323846;

double clamp(double v, double lo, double hi) {
  return std::min(std::max(v, lo), hi);
}
}  // namespace

int harmonic_index(int order) {
  for (std::size_t i = 0; i < kHarmonicOrders.size(); ++i) {
    if (kHarmonicOrders[i] == order) return static_cast<int>(i);
  }
  throw ContractError("unsupported harmonic order " + std::to_string(order));
}

std::array<int, kNumClasses> event_locations(const FeederTopology& topo) {
  static const char* kCanonical[kNumClasses] = {"840", "848", "858", "836",
                                                "812", "828", "852", "862",
                                                "816"};
  bool all_present = true;
  for (const char* label : kCanonical) {
    if (!topo.has_bus(label)) {
      all_present = false;
      break;
    }
  }
  std::array<int, kNumClasses> out{};
  if (all_present) {
    for (int c = 0; c < kNumClasses; ++c) {
      out[static_cast<std::size_t>(c)] = topo.index_of(kCanonical[c]);
    }
    return out;
  }

  if (topo.n_buses() < kNumClasses) {
    throw ValidationError("feeder has " + std::to_string(topo.n_buses()) +
                          " buses, event catalogue needs at least " +
                          std::to_string(kNumClasses));
  }
  // Deterministic max-dispersion spread: start from the bus farthest from
  // the source, then repeatedly take the bus farthest from the picked set.
  std::vector<int> picked;
  int start = 0, best = -1;
  for (int b = 0; b < topo.n_buses(); ++b) {
    int d = topo.hops(topo.root(), b);
    if (d > best) {
      best = d;
      start = b;
    }
  }
  picked.push_back(start);
  while (static_cast<int>(picked.size()) < kNumClasses) {
    int arg = -1, far = -1;
    for (int b = 0; b < topo.n_buses(); ++b) {
      if (std::find(picked.begin(), picked.end(), b) != picked.end()) continue;
      int near = topo.n_buses() + 1;
      for (int p : picked) near = std::min(near, topo.hops(b, p));
      if (near > far) {
        far = near;
        arg = b;
      }
    }
    picked.push_back(arg);
  }
  std::copy(picked.begin(), picked.end(), out.begin());
  return out;
}

EventSpec sample_event_spec(int klass, const FeederTopology& topo,
                            const OperatingPoint& op, int window_len,
                            rng::Stream g) {
  if (klass < 1 || klass > kNumClasses) {
    throw ContractError("event class must be 1..9, got " +
                        std::to_string(klass));
  }
  EventSpec s;
  s.klass = klass;
  s.location = event_locations(topo)[static_cast<std::size_t>(klass - 1)];
  s.onset = static_cast<int>(
      g.range(static_cast<std::int64_t>(0.2 * window_len),
              static_cast<std::int64_t>(0.5 * window_len) - 1));
  s.duration = window_len - s.onset;

  double i_ref = clamp(op.imag(s.location), 0.05, 0.3);
  switch (klass) {
    case 1:
    case 2:  // capacitor bank switching, three-phase
      s.v_step = g.uniform(0.01, 0.02);
      s.pf_step = g.uniform(0.01, 0.03);
      s.osc_period = g.uniform(5.0, 8.0);
      s.osc_tau = g.uniform(10.0, 20.0);
      s.h5_amp = g.uniform(0.02, 0.05);
      s.h3_amp = 0.35 * s.h5_amp;
      s.h_period = g.uniform(3.0, 6.0);
      s.h_tau = g.uniform(5.0, 15.0);
      break;
    case 3:  // single-phase load step
    case 4:  // three-phase load step
      s.i_step = g.uniform(0.05, 0.2);
      s.v_step = g.uniform(0.003, 0.01);
      s.pf_step = g.uniform(0.005, 0.03);
      if (klass == 3) {
        s.phases = {false, false, false};
        s.phases[static_cast<std::size_t>(g.below(3))] = true;
      }
      break;
    case 5:
    case 6:  // motor start, three-phase
      s.surge = g.uniform(3.0, 6.0) * i_ref;
      s.sag_depth = g.uniform(0.02, 0.05);
      s.pf_drop = g.uniform(0.05, 0.15);
      s.decay_tau = g.uniform(15.0, 30.0);
      break;
    case 7:  // single-line-to-ground fault
    case 8:  // line-to-line fault
    case 9:  // three-phase fault
      s.sag_depth = op.vmag(s.location) - g.uniform(0.2, 0.6);
      s.surge = g.uniform(2.0, 5.0) * i_ref;
      s.pf_drop = g.uniform(0.2, 0.5);
      s.duration = static_cast<int>(g.range(6, 24));
      s.h3_amp = g.uniform(0.03, 0.08);
      s.h5_amp = 0.4 * s.h3_amp;
      s.h_period = g.uniform(3.0, 6.0);
      s.h_tau = g.uniform(5.0, 15.0);
      if (klass == 7) {
        s.phases = {false, false, false};
        s.phases[static_cast<std::size_t>(g.below(3))] = true;
      } else if (klass == 8) {
        s.phases = {true, true, true};
        s.phases[static_cast<std::size_t>(g.below(3))] = false;
      }
      break;
    default:
      break;
  }
  if (s.onset + s.duration > window_len) s.duration = window_len - s.onset;
  return s;
}

namespace {

struct Deviation {
  Tensor fund;  // T x 9, unit attenuation
  Tensor h3;
  Tensor h5;
};

// Per-phase deviation templates; phase p writes V at column p, I at 3+p,
// PF at 6+p.
Deviation render_template(const EventSpec& s, int T) {
  Deviation d;
  d.fund = Tensor::Zero(T, kChannels);
  d.h3 = Tensor::Zero(T, kChannels);
  d.h5 = Tensor::Zero(T, kChannels);

  auto burst = [&](Tensor& m, double amp, int at) {
    if (amp == 0.0) return;
    for (int t = at; t < T; ++t) {
      double dt = static_cast<double>(t - at);
      double w = amp * std::exp(-dt / s.h_tau) *
                 std::sin(2.0 * kPi * dt / s.h_period);
      for (int p = 0; p < 3; ++p) {
        if (!s.phases[static_cast<std::size_t>(p)]) continue;
        m(t, p) += w;
        m(t, 3 + p) += 0.8 * w;
      }
    }
  };

  for (int t = s.onset; t < T; ++t) {
    double dt = static_cast<double>(t - s.onset);
    double dv = 0.0, di = 0.0, dpf = 0.0;
    switch (s.klass) {
      case 1:
      case 2: {
        double ring = 1.5 * s.v_step * std::exp(-dt / s.osc_tau) *
                      std::sin(2.0 * kPi * dt / s.osc_period);
        dv = s.v_step + ring;
        di = 0.3 * ring;
        dpf = s.pf_step;
        break;
      }
      case 3:
      case 4:
        di = s.i_step;
        dv = -s.v_step;
        dpf = -s.pf_step;
        break;
      case 5:
      case 6: {
        double decay = std::exp(-dt / s.decay_tau);
        di = s.surge * (0.9 * decay + 0.1);
        dv = -s.sag_depth * decay;
        dpf = -s.pf_drop * decay;
        break;
      }
      case 7:
      case 8:
      case 9: {
        if (t < s.onset + s.duration) {
          dv = -s.sag_depth;
          di = s.surge;
          dpf = -s.pf_drop;
        } else {
          double since = static_cast<double>(t - s.onset - s.duration);
          dv = 0.3 * s.sag_depth * std::exp(-since / 5.0) *
               std::sin(2.0 * kPi * since / 4.0);
        }
        break;
      }
      default:
        break;
    }
    for (int p = 0; p < 3; ++p) {
      if (!s.phases[static_cast<std::size_t>(p)]) continue;
      d.fund(t, p) += dv;
      d.fund(t, 3 + p) += di;
      d.fund(t, 6 + p) += dpf;
    }
  }

  burst(d.h3, s.h3_amp, s.onset);
  burst(d.h5, s.h5_amp, s.onset);
  if (s.klass >= 7) {  // clearing transient re-excites harmonics
    int clear = std::min(s.onset + s.duration, T - 1);
    burst(d.h3, 0.6 * s.h3_amp, clear);
    burst(d.h5, 0.6 * s.h5_amp, clear);
  }
  return d;
}

}  // namespace

std::vector<std::array<Tensor, 3>> synth_event(const FeederTopology& topo,
                                               const OperatingPoint& op,
                                               const EventSpec& spec,
                                               const SynthConfig& cfg,
                                               rng::Stream g) {
  const int T = cfg.window_len;
  if (spec.onset < 0 || spec.onset + spec.duration > T) {
    throw ContractError("event onset " + std::to_string(spec.onset) +
                        " + duration " + std::to_string(spec.duration) +
                        " exceeds window length " + std::to_string(T));
  }
  Deviation dev = render_template(spec, T);

  std::vector<std::array<Tensor, 3>> out;
  out.reserve(topo.sensors().size());
  for (int bus : topo.sensors()) {
    double att =
        std::exp(-cfg.atten_lambda * static_cast<double>(topo.hops(spec.location, bus)));
    Tensor fund(T, kChannels);
    for (int t = 0; t < T; ++t) {
      for (int p = 0; p < 3; ++p) {
        fund(t, p) = op.vmag(bus) + att * dev.fund(t, p);
        fund(t, 3 + p) = op.imag(bus) + att * dev.fund(t, 3 + p);
        fund(t, 6 + p) =
            clamp(op.pf(bus) + att * dev.fund(t, 6 + p), 0.0, 1.0);
      }
    }
    Tensor h3 = att * dev.h3;
    Tensor h5 = att * dev.h5;
    rng::Stream noise = g.fork(static_cast<std::uint64_t>(bus));
    for (int t = 0; t < T; ++t) {
      for (int c = 0; c < kChannels; ++c) {
        fund(t, c) += cfg.noise_fund * noise.normal();
      }
    }
    for (int t = 0; t < T; ++t) {
      for (int c = 0; c < kChannels; ++c) {
        h3(t, c) += cfg.noise_harm * noise.normal();
      }
    }
    for (int t = 0; t < T; ++t) {
      for (int c = 0; c < kChannels; ++c) {
        h5(t, c) += cfg.noise_harm * noise.normal();
      }
    }
    out.push_back({std::move(fund), std::move(h3), std::move(h5)});
  }
  return out;
}

Tensor flat_series(const OperatingPoint& op, int bus, int harmonic,
                   int window_len) {
  if (bus < 0 || static_cast<Index>(bus) >= op.vmag.size()) {
    throw ContractError("flat_series: bus index " + std::to_string(bus) +
                        " out of range");
  }
  int h = harmonic_index(harmonic);
  Tensor m = Tensor::Zero(window_len, kChannels);
  if (h == 0) {
    for (int t = 0; t < window_len; ++t) {
      for (int p = 0; p < 3; ++p) {
        m(t, p) = op.vmag(bus);
        m(t, 3 + p) = op.imag(bus);
        m(t, 6 + p) = op.pf(bus);
      }
    }
  }
  return m;
}

}  // namespace gpmu::feeder
