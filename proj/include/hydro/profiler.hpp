#pragma once

/**
 * @file profiler.hpp
 * @brief Wall-clock phase timers for one time step.
 */

#include "hydro/error.hpp"

#include <array>
#include <chrono>
#include <vector>

namespace hydro {

enum class Phase : int { Total = 0, LevelSet, ConvDiff, Pressure, Update, Sgs, TimeStep, Count };

struct StepRecord
{
    long step = 0;
    double t = 0.0;
    double dt = 0.0;
    double T_TT = 0.0;
    double T_LS = 0.0;
    double T_CD = 0.0;
    double T_P = 0.0;
    double T_up = 0.0;
    double comm = 0.0;
};

/// Accumulates phase durations. Scopes must close in LIFO order.
class Profiler
{
public:
    using Clock = std::chrono::steady_clock;

    void begin(Phase p)
    {
        stack_.push_back({p, Clock::now()});
    }

    void end(Phase p)
    {
        if (stack_.empty() || stack_.back().first != p) {
            throw Error(ErrorCode::InvalidArgument, "profiler scopes closed out of order");
        }
        const double s = std::chrono::duration<double>(Clock::now() - stack_.back().second).count();
        stack_.pop_back();
        seconds_[static_cast<std::size_t>(p)] += s;
    }

    double seconds(Phase p) const { return seconds_[static_cast<std::size_t>(p)]; }
    int depth() const { return static_cast<int>(stack_.size()); }

    void reset()
    {
        seconds_.fill(0.0);
        stack_.clear();
    }

private:
    std::array<double, static_cast<std::size_t>(Phase::Count)> seconds_{};
    std::vector<std::pair<Phase, Clock::time_point>> stack_;
};

/// RAII phase scope; a null profiler makes it a no-op.
class PhaseScope
{
public:
    PhaseScope(Profiler* p, Phase ph) : p_(p), ph_(ph)
    {
        if (p_) p_->begin(ph_);
    }
    ~PhaseScope()
    {
        if (p_) p_->end(ph_);
    }
    PhaseScope(const PhaseScope&) = delete;
    PhaseScope& operator=(const PhaseScope&) = delete;

private:
    Profiler* p_;
    Phase ph_;
};

} // namespace hydro
