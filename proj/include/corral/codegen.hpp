#pragma once

#include "corral/repair.hpp"
#include "corral/session.hpp"
#include "corral/table.hpp"

#include <span>
#include <string>
#include <vector>

namespace corral {

struct ScriptArtifact {
    std::string source_text;
    std::string language_tag = "python3";
    std::string input_ref;
    std::size_t action_count = 0;
    /// False when some step could not be translated and was left as a TODO.
    bool verifiable = true;
    /// One message per untranslated step.
    std::vector<std::string> warnings;
};

/// Emits a standalone Python 3 script (standard library only) that reads the
/// original CSV, replays `actions` and writes the result. Usage:
///   python3 script.py [input.csv] [output.csv|-]
/// Values computed by the engine (means, conversions) are baked in as
/// literals, and row references are translated to original file positions.
auto generate_script(const Table& original, std::span<const RepairAction> actions,
                     const SourceInfo& source, const WranglerRegistry* wranglers = nullptr)
    -> ScriptArtifact;

/// Script for the session's committed actions (redo stack excluded).
auto generate_script(const Session& session) -> ScriptArtifact;

}  // namespace corral
