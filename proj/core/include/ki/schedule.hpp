#ifndef KI_SCHEDULE_HPP
#define KI_SCHEDULE_HPP

#include <cstdint>
#include <string>

namespace ki {

// Inheritance-rate schedule. Linear decays alpha from 1 to 0 across the
// teacher-guided phase; heviside holds 1 then drops to 0 at the switch
// step; constant and self_only are flat.
struct ScheduleSpec {
    enum class Strategy { linear, heviside, constant, self_only };

    Strategy strategy = Strategy::self_only;
    int64_t total_steps = 0;
    int64_t guided_steps = 0;     // linear / heviside
    double constant_alpha = 0.5;  // constant

    void validate() const;
    bool uses_teacher() const {
        return !(strategy == Strategy::self_only ||
                 (strategy == Strategy::constant && constant_alpha == 0.0) ||
                 ((strategy == Strategy::linear || strategy == Strategy::heviside) &&
                  guided_steps == 0));
    }
};

ScheduleSpec::Strategy parse_strategy(const std::string& name);
const char* strategy_name(ScheduleSpec::Strategy s);

double inheritance_rate(int64_t t, const ScheduleSpec& spec);

}  // namespace ki

#endif
