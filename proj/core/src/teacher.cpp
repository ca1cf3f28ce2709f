#include "ki/teacher.hpp"

#include "ki/errors.hpp"

namespace ki {

void TeacherRegistry::add(const std::string& domain_tag, TeacherHandle handle) {
    require(!domain_tag.empty(), Errc::InvalidArgument, "empty domain tag");
    if (const auto* live = std::get_if<LiveTeacher>(&handle)) {
        require(live->params != nullptr && live->config != nullptr, Errc::InvalidArgument,
                "live teacher must carry params and config");
        require(live->tau > 0.0, Errc::InvalidTemperature, "live teacher tau must be positive");
    }
    auto [it, inserted] = by_domain_.emplace(domain_tag, std::move(handle));
    require(inserted, Errc::InvalidArgument, "duplicate teacher tag: " + domain_tag);
}

const TeacherHandle& route_teacher(const std::string& domain_tag, const TeacherRegistry& registry) {
    require(!registry.empty(), Errc::InvalidArgument, "teacher registry is empty");
    auto it = registry.by_domain_.find(domain_tag);
    if (it != registry.by_domain_.end()) return it->second;
    it = registry.by_domain_.find(TeacherRegistry::kWildcard);
    require(it != registry.by_domain_.end(), Errc::NoTeacherForDomain,
            "no teacher for domain '" + domain_tag + "' and no wildcard");
    return it->second;
}

}  // namespace ki
