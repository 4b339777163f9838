#pragma once

#include <iosfwd>

#include "medkgeval/config.hpp"
#include "medkgeval/orchestration.hpp"

namespace medkgeval {

// Backend spec grammar:
//   sim-patient | sim-judge
//   sim-doctor[:claim=NAME&claim_after=N&thorough=BOOL&never_claim=BOOL]
//   scripted:PATH[?strict=BOOL&fallback=TEXT]
//   http:NAME                (named [backend.NAME] section in the config)
//   record:SPEC@PATH         (wraps SPEC, dumps the exchanges to PATH)
struct BackendHandle {
    std::shared_ptr<ChatBackend> backend;
    std::shared_ptr<RecordingChatBackend> recorder;  // set for record: specs
    std::filesystem::path record_path;
};

BackendHandle make_backend(const std::string& spec, const RunConfig& config,
                           double role_temperature);

// Full command-line surface: kg-stats, kg-filter, gen, run, report,
// consistency, align, mae. Returns the process exit status: 0 success,
// 2 configuration error, 3 partial suite, 4 I/O or backend failure.
int cli_dispatch(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace medkgeval
