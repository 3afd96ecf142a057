#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include "star/executor.hpp"

// Stage executor backed by an external generation service. Requests are
// JSON-over-HTTP: POST {model, messages:[{role, content}...], temperature}
// and the reply is {content: "..."} where the content carries the stage
// artifact as a fenced JSON block. One malformed reply earns one retry;
// a second earns a typed error carrying the raw response.

namespace star {

class GenerationError : public std::runtime_error {
 public:
  GenerationError(StageIndex stage, std::string raw, const std::string& what)
      : std::runtime_error(what), stage_(stage), raw_(std::move(raw)) {}

  StageIndex stage() const { return stage_; }
  const std::string& raw_response() const { return raw_; }

 private:
  StageIndex stage_;
  std::string raw_;
};

class ExternalExecutor : public StageExecutor {
 public:
  struct Options {
    std::string url;    // scheme://host:port; path fixed at /v1/generate
    std::string token;  // bearer token; empty sends no auth header
    std::string model = "default";
    double temperature = 0.0;
    int max_in_flight = 4;  // concurrent requests across all threads
    int timeout_s = 30;
  };

  // Reads STAR_GEN_URL and STAR_GEN_TOKEN. Throws std::runtime_error when
  // the URL is unset — there is no sensible default endpoint.
  static Options from_env();

  explicit ExternalExecutor(Options opts);

  std::string executor_id() const override;
  StageArtifact run_stage(StageIndex s, const RcaTrace& upstream,
                          const IncidentContext& ctx,
                          std::uint64_t seed) override;

  // Prompt construction and reply parsing, exposed for tests.
  static std::string stage_prompt(StageIndex s, const RcaTrace& upstream,
                                  const IncidentContext& ctx,
                                  std::uint64_t seed);
  // The first ```json (or bare ```) fenced block; falls back to the whole
  // content when no fence is present.
  static std::optional<std::string> extract_artifact_block(
      const std::string& content);

 private:
  struct Gate;  // bounds this executor's in-flight requests

  std::string post_generate(const std::string& prompt, StageIndex s);

  Options opts_;
  std::shared_ptr<Gate> gate_;
};

}  // namespace star
