#pragma once

#include <istream>
#include <ostream>

#include "portal/app.hpp"

namespace portal {

struct ReplOptions {
    bool show_inner = false;
    bool prompt = false;  // print "> " before each command (interactive use)
};

// Text-mode desk session. Commands go through the same engine entry
// points the HTTP gateway uses; output is derived from engine events and
// carries no timestamps or ids, so scripted runs are byte-stable.
// Returns 0 on quit or end of input.
int run_repl(PortalApp& app, std::istream& in, std::ostream& out, const ReplOptions& options = {});

// The command list printed by "help" and on unknown commands.
std::string repl_help();

}  // namespace portal
