#ifndef KI_CONFIG_FILE_HPP
#define KI_CONFIG_FILE_HPP

#include <string>

#include "ki/model.hpp"
#include "ki/trainer.hpp"

namespace ki {

struct RunFileConfig {
    ModelConfig model;
    TrainConfig train;
    bool vocab_size_explicit = false;  // lets callers default V from the vocab file
};

// Flat dotted-key config text: one `section.key=value` per line, '#'
// comments. Unknown keys are rejected; absent keys take the documented
// defaults. Parse is total: either a fully validated config or an error.
RunFileConfig parse_config_text(const std::string& text);
RunFileConfig parse_config(const std::string& path);

}  // namespace ki

#endif
