#include "star/backend.hpp"

#include <condition_variable>
#include <cstdlib>
#include <mutex>

#include <httplib.h>

#include "star/json_io.hpp"

namespace star {

// Bounds concurrent requests without pinning the limit at compile time.
struct ExternalExecutor::Gate {
  explicit Gate(int slots) : slots(slots < 1 ? 1 : slots) {}

  void acquire() {
    std::unique_lock lock(mu);
    cv.wait(lock, [&] { return in_flight < slots; });
    ++in_flight;
  }
  void release() {
    {
      std::lock_guard lock(mu);
      --in_flight;
    }
    cv.notify_one();
  }

  std::mutex mu;
  std::condition_variable cv;
  int slots;
  int in_flight = 0;
};

namespace {

const char* stage_task(StageIndex s) {
  switch (s) {
    case StageIndex::S1:
      return "Collect the evidence package: the incident window, the entity "
             "scope, and scored evidence items for every anomalous signal.";
    case StageIndex::S2:
      return "Form root-cause hypotheses from the evidence package: one per "
             "plausible candidate entity with its fault class, supporting "
             "evidence ids and rationale.";
    case StageIndex::S3:
      return "Build the causal analysis: propagation paths ordered root to "
             "sink with per-step onsets and per-link supporting evidence.";
    case StageIndex::S4:
      return "Write the decision report: a confidence-ranked candidate list "
             "and concrete verification tests.";
  }
  return "";
}

const char* stage_shape(StageIndex s) {
  switch (s) {
    case StageIndex::S1:
      return R"({"incident_window": {"start": 0, "end": 0}, "entity_scope": [], "items": [{"id": "e01", "modality": "metric", "target": "svc:x", "window": {"start": 0, "end": 0}, "anomaly_score": 0.0, "summary": ""}]})";
    case StageIndex::S2:
      return R"({"hypotheses": [{"id": "h01", "candidate_entity": "svc:x", "fault_class": "cpu_hog", "supporting_evidence": ["e01"], "rationale": ""}]})";
    case StageIndex::S3:
      return R"({"paths": [{"id": "p01", "direction": "reverse_call", "steps": [{"entity": "svc:x", "onset": 0}], "link_support": {"0": ["e01"]}, "rationale": ""}], "insufficient_evidence": false})";
    case StageIndex::S4:
      return R"({"ranking": [{"entity": "svc:x", "fault_class": "cpu_hog", "confidence": 0.0, "derived_from": ["p01"]}], "verification_tests": [{"target": "svc:x", "description": "", "signal": ""}], "verification_first": false})";
  }
  return "";
}

}  // namespace

ExternalExecutor::Options ExternalExecutor::from_env() {
  Options opts;
  const char* url = std::getenv("STAR_GEN_URL");
  if (url == nullptr || *url == '\0')
    throw std::runtime_error(
        "STAR_GEN_URL is not set; the external executor needs a generation "
        "endpoint");
  opts.url = url;
  if (const char* token = std::getenv("STAR_GEN_TOKEN")) opts.token = token;
  return opts;
}

ExternalExecutor::ExternalExecutor(Options opts)
    : opts_(std::move(opts)),
      gate_(std::make_shared<Gate>(opts_.max_in_flight)) {
  if (opts_.url.empty())
    throw std::invalid_argument("external executor needs a non-empty url");
}

std::string ExternalExecutor::executor_id() const {
  return "external:" + opts_.model;
}

std::string ExternalExecutor::stage_prompt(StageIndex s,
                                           const RcaTrace& upstream,
                                           const IncidentContext& ctx,
                                           std::uint64_t seed) {
  json incident{{"incident_id", ctx.incident_id},
                {"services", ctx.topo.services},
                {"call_edges", ctx.topo.call_edges},
                {"alert_entity", ctx.summary.earliest_entity
                                     ? json(*ctx.summary.earliest_entity)
                                     : json()},
                {"alert_onset", ctx.summary.earliest_onset
                                    ? json(*ctx.summary.earliest_onset)
                                    : json()}};
  json upstream_artifacts = json::object();
  if (stage_number(s) > 1) upstream_artifacts["evidence"] = to_json(upstream.ep);
  if (stage_number(s) > 2)
    upstream_artifacts["hypotheses"] = to_json(upstream.hs);
  if (stage_number(s) > 3) upstream_artifacts["analysis"] = to_json(upstream.as_);

  std::string prompt;
  prompt += "You are one stage of a microservice root-cause analysis "
            "pipeline.\n\n";
  prompt += "Task: ";
  prompt += stage_task(s);
  prompt += "\n\nIncident:\n" + incident.dump(2) + "\n";
  if (!upstream_artifacts.empty())
    prompt += "\nUpstream artifacts:\n" + upstream_artifacts.dump(2) + "\n";
  prompt += "\nReply with exactly one fenced JSON block of this shape:\n";
  prompt += "```json\n";
  prompt += stage_shape(s);
  prompt += "\n```\n";
  prompt += "\nDeterminism: replay seed " + std::to_string(seed) +
            "; identical inputs must produce identical output.\n";
  return prompt;
}

std::optional<std::string> ExternalExecutor::extract_artifact_block(
    const std::string& content) {
  const std::string fences[] = {"```json", "```"};
  for (const auto& fence : fences) {
    const auto open = content.find(fence);
    if (open == std::string::npos) continue;
    const auto body_start = content.find('\n', open);
    if (body_start == std::string::npos) continue;
    const auto close = content.find("```", body_start);
    if (close == std::string::npos) continue;
    return content.substr(body_start + 1, close - body_start - 1);
  }
  if (content.find_first_not_of(" \t\r\n") == std::string::npos)
    return std::nullopt;
  return content;  // no fence: hope the content is the JSON itself
}

std::string ExternalExecutor::post_generate(const std::string& prompt,
                                            StageIndex s) {
  json body{{"model", opts_.model},
            {"messages",
             json::array(
                 {json{{"role", "system"},
                       {"content",
                        "You produce diagnostic artifacts as fenced JSON."}},
                  json{{"role", "user"}, {"content", prompt}}})},
            {"temperature", opts_.temperature}};

  gate_->acquire();
  struct Release {
    Gate* gate;
    ~Release() { gate->release(); }
  } release_on_exit{gate_.get()};

  httplib::Client client(opts_.url);
  client.set_connection_timeout(opts_.timeout_s);
  client.set_read_timeout(opts_.timeout_s);
  httplib::Headers headers;
  if (!opts_.token.empty())
    headers.emplace("Authorization", "Bearer " + opts_.token);
  auto result = client.Post("/v1/generate", headers, body.dump(),
                            "application/json");

  if (!result)
    throw GenerationError(s, "",
                          "generation request failed: " +
                              httplib::to_string(result.error()));
  if (result->status != 200)
    throw GenerationError(s, result->body,
                          "generation endpoint returned status " +
                              std::to_string(result->status));
  json reply;
  try {
    reply = json::parse(result->body);
  } catch (const json::exception& e) {
    throw GenerationError(s, result->body,
                          std::string("generation reply is not JSON: ") +
                              e.what());
  }
  if (!reply.contains("content") || !reply["content"].is_string())
    throw GenerationError(s, result->body,
                          "generation reply has no string `content` field");
  return reply["content"].get<std::string>();
}

StageArtifact ExternalExecutor::run_stage(StageIndex s,
                                          const RcaTrace& upstream,
                                          const IncidentContext& ctx,
                                          std::uint64_t seed) {
  const std::string prompt = stage_prompt(s, upstream, ctx, seed);
  std::string last_content;
  std::string last_error;
  for (int attempt = 0; attempt < 2; ++attempt) {
    last_content = post_generate(prompt, s);
    const auto block = extract_artifact_block(last_content);
    if (!block) {
      last_error = "reply carries no artifact block";
      continue;
    }
    try {
      return stage_artifact_from_json(s, json::parse(*block));
    } catch (const json::exception& e) {
      last_error = std::string("artifact block is not JSON: ") + e.what();
    } catch (const std::invalid_argument& e) {
      last_error = std::string("artifact rejected: ") + e.what();
    }
  }
  throw GenerationError(s, last_content,
                        "stage " + to_string(s) +
                            " generation failed after retry: " + last_error);
}

}  // namespace star
