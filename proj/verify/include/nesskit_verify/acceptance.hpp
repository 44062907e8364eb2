#pragma once

#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "nesskit/device.hpp"

namespace nesskit::verify {

struct CriterionResult {
    int id = 0;
    std::string title;
    bool passed = false;
    bool skipped = false;  // long-running criterion not requested
    bool gating = true;
    std::string detail;
    double seconds = 0.0;
};

struct AcceptanceOptions {
    bool full = false;  // run the dynamics criteria 9-12
    std::filesystem::path artifact_dir = ".";
    std::set<int> only;  // empty runs everything
};

// Runs the criteria in order and reports each one through `on_result` as it finishes.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options,
                                            const std::function<void(const CriterionResult&)>& on_result = {});

// "PASS  [ 1] title (0.12 s): detail"
std::string format_result(const CriterionResult& result);

// True when every gating criterion that ran has passed.
bool all_passed(const std::vector<CriterionResult>& results);

// Barrier device, box and reservoirs used by the transient-current criteria.
SystemConfig transient_config();

// Same reservoirs with a well between two barriers, so the device binds a state.
SystemConfig bound_state_transient_config();

}  // namespace nesskit::verify
