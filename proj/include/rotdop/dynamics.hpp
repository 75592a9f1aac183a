#pragma once

// Time-dependent master equation of the 8-level ion driven by the UV, IR1
// and IR2 lasers with micromotion-induced frequency modulation.
//
// Frame: the S manifold rotates with the UV laser and the D manifold with
// IR2, so the IR1 couplings carry the phase of the IR1-IR2 beat. Each drive's
// detuning is modulated as Delta + delta cos(Omega_RF t + phase).

#include <array>
#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rotdop/atom.hpp"
#include "rotdop/beams.hpp"

namespace rotdop {

using Complex = std::complex<double>;
using Mat8 = Eigen::Matrix<Complex, 8, 8>;
using Populations = std::array<double, kNumLevels>;

enum class DriveLabel { UV, IR1, IR2 };

std::string to_string(DriveLabel l);

struct LaserDrive {
  DriveLabel label = DriveLabel::UV;
  double detuning = 0.0;      // rad/s
  double rabi = 0.0;          // rad/s, on the strongest line of the transition
  Polarization polarization = Polarization::SigmaPlusMinus;
  BeamGeometry beam = BeamGeometry::plane_wave(397e-9);
  double fm_amplitude = 0.0;  // Doppler modulation depth, rad/s
  double fm_phase = 0.0;      // rad
};

struct DriveClock {
  double rf = mhz(22.135); // trap drive angular frequency
  double beat = 0.0;       // Delta_IR2 - Delta_IR1

  static DriveClock from_drives(const std::vector<LaserDrive> &drives, double rf = mhz(22.135));
};

struct InvariantReport {
  double trace_error = 0.0;
  double hermiticity_error = 0.0;
  double min_eigenvalue = 0.0;
};

struct DensityState {
  Mat8 rho = Mat8::Zero();
  double t = 0.0;

  static DensityState pure(std::size_t level);
  Populations populations() const;
  /// Eigenvalue check is optional because it dominates the cost.
  InvariantReport check(bool with_eigenvalues = true) const;
};

class IntegrationError : public std::runtime_error {
public:
  IntegrationError(const std::string &what, double t, InvariantReport report)
      : std::runtime_error(what), time(t), report(report) {}
  double time;
  InvariantReport report;
};

/// Validates drive labels and returns them ordered UV, IR1, IR2.
std::array<const LaserDrive *, 3> order_drives(const std::vector<LaserDrive> &drives);

/// H(t)/hbar in rad/s.
Mat8 build_hamiltonian(const LevelStructure &s, const std::vector<LaserDrive> &drives,
                       const DriveClock &clock, double t);

struct JumpEntry {
  std::size_t row;
  std::size_t col;
  Complex amp;
};

struct JumpOperator {
  std::string label;
  double rate; // L = sqrt(rate) * sum amp |row><col|
  std::vector<JumpEntry> entries;
};

struct Dissipator {
  std::vector<JumpOperator> jumps;

  /// L(rho) in Lindblad form.
  Mat8 apply(const Mat8 &rho) const;
  /// (1/2) sum_k rate_k L_k^dag L_k, the anti-Hermitian part of H_eff.
  Mat8 loss_matrix() const;
};

/// Spontaneous decay grouped by photon polarization (so coherences between P
/// sublevels are transferred), inter-manifold and intra-manifold dephasing, and
/// isotropic depolarization within D32.
Dissipator build_dissipator(const LevelStructure &s);

struct EvolveSettings {
  double transient = 30e-6;
  double window = 70e-6;
  double rtol = 1e-8;
  double atol = 1e-10;
  /// Snap the window to whole beat (or RF) periods.
  bool snap_window = true;
  /// Accepted steps between eigenvalue checks; 0 checks only at the end.
  std::size_t eigen_check_stride = 512;
  /// Accepted steps between stored trajectory samples; 0 stores none.
  std::size_t trajectory_stride = 0;
  std::size_t max_steps = 50'000'000;
  /// Step-size cap under FM, as a fraction of the RF period; keeps the error
  /// estimator from stepping across whole modulation cycles.
  double steps_per_rf_period = 20.0;
  /// Replace rho0 by the periodic steady state before integrating; needed
  /// when optical pumping is much slower than the transient. With both FM
  /// and a nonzero beat the FM-free state is used, so the transient must
  /// still cover the response to the modulation.
  bool periodic_warm_start = false;
};

struct TrajectorySample {
  double t;
  Populations populations;
};

struct TrajectorySummary {
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
  std::size_t rhs_calls = 0;
  double window_start = 0.0;
  double window_length = 0.0;
  double max_trace_error = 0.0;
  double max_hermiticity_error = 0.0;
  double min_eigenvalue = 0.0;
  std::vector<TrajectorySample> samples;
};

struct EvolveResult {
  Populations populations{}; // averaged over the window
  DensityState final_state;
  TrajectorySummary summary;
};

/// Integrates d rho/dt = -i[H(t), rho] + L(rho) and averages the populations
/// over [transient, transient + window]. Throws IntegrationError on step-size
/// underflow or an invariant violated by more than 10x its tolerance.
EvolveResult evolve(const DensityState &rho0, const LevelStructure &s,
                    const std::vector<LaserDrive> &drives, const DriveClock &clock,
                    const EvolveSettings &settings = {});

/// Fixed point of the one-period propagator (period 2pi/beat, or 2pi/Omega_RF
/// when the beat vanishes; 1 us for a static Hamiltonian). Throws
/// ValidationError when the drive has two incommensurate frequencies.
DensityState periodic_steady_state(const LevelStructure &s, const std::vector<LaserDrive> &drives,
                                   const DriveClock &clock, const EvolveSettings &settings = {});

/// Sum of the two P12 populations, proportional to the scattered UV light.
double fluorescence(const Populations &p);

/// Invariant tolerances of a physical density matrix.
inline constexpr double kTraceTol = 1e-8;
inline constexpr double kHermTol = 1e-10;
inline constexpr double kEigenTol = 1e-8;

/// Writes (t, populations) samples as CSV.
void write_trajectory_csv(const std::string &path, const TrajectorySummary &summary);

} // namespace rotdop
