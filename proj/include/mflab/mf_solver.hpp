#ifndef MFLAB_MF_SOLVER_HPP
#define MFLAB_MF_SOLVER_HPP

#include "mflab/forward_backward.hpp"
#include "mflab/state.hpp"

#include <stdexcept>

namespace mflab {

struct TimeGrid {
    double t_end = 1.0;
    double dt = 1e-3;
    enum class Scheme { Euler, Rk4 };
    Scheme scheme = Scheme::Rk4;
    int snapshot_stride = 1;

    void validate() const;
    long long steps() const;
    double time_at(long long k) const { return static_cast<double>(k) * dt; }
};

struct BlowupError : std::runtime_error {
    double t;
    explicit BlowupError(double t_)
        : std::runtime_error("parameter magnitude exceeded 1e12 at t = " +
                             std::to_string(t_)),
          t(t_) {}
};

// Right-hand side of the particle ODEs: for every parameter,
// -xi(t) * (exact dataset average of the matching update quantity).
ParamState particle_rhs(const ParticleState& state, const ArchitectureSpec& spec,
                        const Dataset& data, double t);

// Explicit time stepping on the grid; snapshots every snapshot_stride steps
// plus the initial and final states. Aborts with BlowupError when any
// parameter magnitude exceeds 1e12.
TrajectoryLog integrate_particle(const ParticleState& init, const ArchitectureSpec& spec,
                                 const Dataset& data, const TimeGrid& grid);

// One application of the fixed-point map: the input trajectory must hold a
// snapshot at every grid time; the integral is the trapezoid rule on the
// grid, with updates always evaluated against the input trajectory.
TrajectoryLog picard_map(const TrajectoryLog& traj, const ArchitectureSpec& spec,
                         const Dataset& data, const TimeGrid& grid);

struct PicardReport {
    std::vector<double> residuals; // sup-norm of F(W) - W per iteration
    int iterations_used = 0;
    bool converged = false;
};

// Iterates picard_map starting from the trajectory frozen at the
// initialization until the residual drops below tol or k_max is reached.
std::pair<TrajectoryLog, PicardReport> picard_solve(const ParticleState& init,
                                                    const ArchitectureSpec& spec,
                                                    const Dataset& data,
                                                    const TimeGrid& grid, int k_max,
                                                    double tol);

} // namespace mflab

#endif
