#pragma once

#include <string>
#include <vector>

#include "bestow/semantics.hpp"
#include "bestow/types.hpp"

// Executable well-formedness oracle for configurations, one checker per
// variant. The explorer runs the active checker after every transition; a
// violation after a step from a well-formed state is a preservation bug.
namespace bst::calc {

struct WfViolation {
  std::string rule;     // wf-heap, wf-actor, wf-owners, ...
  std::string subject;  // which actor/queue/location tripped it
  std::string detail;
};

struct WfReport {
  bool ok = true;
  std::vector<WfViolation> violations;

  void add(std::string rule, std::string subject, std::string detail) {
    ok = false;
    violations.push_back(
        {std::move(rule), std::move(subject), std::move(detail)});
  }

  std::string str() const;
};

// Violations are accumulated rather than fail-fast so one run can diagnose
// several injected bugs at once.
WfReport check_wf_core(const Config& cfg, const TypecheckOptions& opts = {});
WfReport check_wf_transfer(const Config& cfg,
                           const TypecheckOptions& opts = {});
WfReport check_wf_private(const Config& cfg, const TypecheckOptions& opts = {});

WfReport check_wf(const Config& cfg, Variant variant,
                  const TypecheckOptions& opts = {});

}  // namespace bst::calc
