#include "ki/schedule.hpp"

#include <algorithm>

#include "ki/errors.hpp"

namespace ki {

void ScheduleSpec::validate() const {
    require(total_steps >= 0, Errc::ConfigError, "total_steps must be >= 0");
    require(guided_steps >= 0 && guided_steps <= total_steps, Errc::ConfigError,
            "guided_steps must lie in [0, total_steps]");
    require(constant_alpha >= 0.0 && constant_alpha <= 1.0, Errc::ConfigError,
            "constant_alpha must lie in [0,1]");
}

ScheduleSpec::Strategy parse_strategy(const std::string& name) {
    if (name == "linear") return ScheduleSpec::Strategy::linear;
    if (name == "heviside") return ScheduleSpec::Strategy::heviside;
    if (name == "constant") return ScheduleSpec::Strategy::constant;
    if (name == "self_only") return ScheduleSpec::Strategy::self_only;
    fail(Errc::ConfigError, "unknown schedule strategy: " + name);
}

const char* strategy_name(ScheduleSpec::Strategy s) {
    switch (s) {
        case ScheduleSpec::Strategy::linear: return "linear";
        case ScheduleSpec::Strategy::heviside: return "heviside";
        case ScheduleSpec::Strategy::constant: return "constant";
        case ScheduleSpec::Strategy::self_only: return "self_only";
    }
    return "?";
}

double inheritance_rate(int64_t t, const ScheduleSpec& spec) {
    spec.validate();
    require(t >= 0 && t <= spec.total_steps, Errc::StepOutOfRange,
            "step " + std::to_string(t) + " outside [0, T]");
    switch (spec.strategy) {
        case ScheduleSpec::Strategy::linear:
            if (spec.guided_steps == 0) return 0.0;
            return std::max(1.0 - double(t) / double(spec.guided_steps), 0.0);
        case ScheduleSpec::Strategy::heviside:
            return t < spec.guided_steps ? 1.0 : 0.0;
        case ScheduleSpec::Strategy::constant:
            return spec.constant_alpha;
        case ScheduleSpec::Strategy::self_only:
            return 0.0;
    }
    return 0.0;
}

}  // namespace ki
