#ifndef KI_TEACHER_HPP
#define KI_TEACHER_HPP

#include <map>
#include <string>
#include <variant>

#include "ki/logit_cache.hpp"
#include "ki/model.hpp"

namespace ki {

// A teacher queried during training instead of from an offline cache.
// top_k == 0 keeps the full distribution.
struct LiveTeacher {
    const Params<float>* params = nullptr;
    const ModelConfig* config = nullptr;
    double tau = 1.0;
    int top_k = 0;
};

using TeacherHandle = std::variant<const LogitCache*, LiveTeacher>;

// Domain tag -> teacher. "*" is the wildcard fallback; tags are unique by
// construction. Immutable once populated.
class TeacherRegistry {
public:
    static constexpr const char* kWildcard = "*";

    void add(const std::string& domain_tag, TeacherHandle handle);
    bool empty() const { return by_domain_.empty(); }
    size_t size() const { return by_domain_.size(); }
    const std::map<std::string, TeacherHandle>& entries() const { return by_domain_; }

private:
    friend const TeacherHandle& route_teacher(const std::string&, const TeacherRegistry&);
    std::map<std::string, TeacherHandle> by_domain_;
};

// Exact tag match wins, otherwise the wildcard.
const TeacherHandle& route_teacher(const std::string& domain_tag, const TeacherRegistry& registry);

}  // namespace ki

#endif
