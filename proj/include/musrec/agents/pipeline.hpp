#pragma once

// Sequential four-task recommendation pipeline: read catalogue, read history,
// infer genres, recommend. Each task's agent may call one HTTP tool; task
// outputs are chained into later prompts verbatim.

#include <chrono>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "musrec/agents/backend.hpp"
#include "musrec/agents/parse.hpp"
#include "musrec/agents/specs.hpp"
#include "musrec/agents/tools.hpp"
#include "musrec/domain.hpp"
#include "musrec/http.hpp"
#include "musrec/recommendation.hpp"

namespace musrec::agents {

/// One named block of prior output fed into a prompt.
struct ContextEntry {
  std::string name;
  std::string content;
};

struct TaskOutput {
  std::string text;
  std::optional<json> tool_result;
  std::string tool_url;
  std::string prompt;
  ChatReply reply;
};

struct TranscriptEntry {
  std::string task;
  std::string agent;
  std::string prompt;
  std::string output;
  std::string tool_url;
  double latency_seconds = 0.0;
  int attempts = 1;
};

struct PipelineResult {
  RecommendationList recommendations;
  std::vector<std::string> inferred_genres;
  std::vector<TranscriptEntry> transcript;
  double seconds = 0.0;
  std::vector<DroppedItem> dropped_hallucinations;
};

/// Raised when a run aborts; carries the transcript of the tasks that
/// completed before the failure.
class PipelineError : public Error {
 public:
  PipelineError(ErrorKind cause, const std::string& message, std::string failed_task,
                std::vector<TranscriptEntry> transcript)
      : Error(cause, message), failed_task_(std::move(failed_task)), transcript_(std::move(transcript)) {}

  const std::string& failed_task() const { return failed_task_; }
  const std::vector<TranscriptEntry>& transcript() const { return transcript_; }

 private:
  std::string failed_task_;
  std::vector<TranscriptEntry> transcript_;
};

struct PipelineConfig {
  std::string base_url = "http://127.0.0.1:8080";
  http::Get get;  // unset: real HTTP client
  std::size_t k = 20;
  PipelineSpec spec = PipelineSpec::defaults();
};

/// Zero-shot prompt: role line, goal, backstory, task description, expected
/// output, then each context block in order. Throws ContractViolation when a
/// context block the task declares is missing or the agent does not match.
inline std::string render_prompt(const AgentSpec& agent, const TaskSpec& task,
                                 const std::vector<ContextEntry>& context, const std::string& url = {}) {
  if (task.agent != agent.name) {
    throw Error(ErrorKind::ContractViolation, "task " + task.name + " belongs to " + task.agent + ", not " + agent.name);
  }
  for (const auto& dep : task.context) {
    bool present = false;
    for (const auto& c : context) present = present || c.name == dep;
    if (!present) throw Error(ErrorKind::ContractViolation, "task " + task.name + " is missing context from " + dep);
  }
  std::string description = task.description;
  const std::string placeholder = "{url}";
  if (auto pos = description.find(placeholder); pos != std::string::npos) {
    if (url.empty()) throw Error(ErrorKind::ContractViolation, "task " + task.name + " needs a URL");
    description.replace(pos, placeholder.size(), url);
  }

  std::string prompt;
  prompt += "You are " + agent.role + ".\n";
  prompt += "Goal: " + agent.goal + "\n";
  prompt += "Backstory: " + agent.backstory + "\n\n";
  prompt += "Task: " + description + "\n";
  prompt += "Expected output: " + task.expected_output + "\n";
  if (!context.empty()) {
    prompt += "\nContext:\n";
    for (const auto& c : context) {
      prompt += "--- " + c.name + " ---\n";
      prompt += c.content;
      if (c.content.empty() || c.content.back() != '\n') prompt += '\n';
    }
  }
  return prompt;
}

/// Fetches the agent's tool result (if any), appends it to the context, and
/// asks the backend. Tool failures propagate unchanged.
inline TaskOutput run_task(const TaskSpec& task, const PipelineSpec& spec, ChatBackend& backend,
                           const std::vector<ContextEntry>& context, const PipelineConfig& config,
                           const std::string& user_id) {
  const auto& agent = spec.agent(task.agent);
  TaskOutput out;
  std::vector<ContextEntry> prompt_context;
  for (const auto& dep : task.context) {
    for (const auto& c : context) {
      if (c.name == dep) prompt_context.push_back(c);
    }
  }
  if (agent.tool) {
    const auto& tool = spec.tool(*agent.tool);
    out.tool_url = resolve_endpoint(tool, config.base_url, user_id);
    const auto get = config.get ? config.get : http::default_get();
    out.tool_result = fetch_json_list(out.tool_url, get, tool.result_limit);
    prompt_context.push_back({tool.name + " result", out.tool_result->dump()});
  }
  out.prompt = render_prompt(agent, task, prompt_context, out.tool_url);
  out.reply = backend.complete({task.name, {}, out.prompt});
  out.text = out.reply.text;
  return out;
}

inline PipelineResult run_pipeline(const std::string& user_id, ChatBackend& backend, const PipelineConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  PipelineResult result;
  std::vector<ContextEntry> context;
  Catalog catalog;
  const auto& tasks = config.spec.tasks();

  for (const auto& task : tasks) {
    try {
      auto out = run_task(task, config.spec, backend, context, config, user_id);
      if (task.name == kReadCatalogue) {
        if (!out.tool_result) throw Error(ErrorKind::ContractViolation, "catalogue task has no tool");
        try {
          catalog = Catalog(tracks_from_json(*out.tool_result));
        } catch (const Error& e) {
          throw Error(ErrorKind::Tool, std::string("catalogue payload rejected: ") + e.what());
        }
      } else if (task.name == kInferGenres) {
        result.inferred_genres = parse_genres(out.text, 5);
      } else if (task.name == kRecommendSongs) {
        auto parsed = parse_recommendations(out.text, catalog, config.k);
        result.recommendations = std::move(parsed.recommendations);
        result.dropped_hallucinations = std::move(parsed.dropped);
      }
      context.push_back({task.name, out.text});
      result.transcript.push_back({task.name, task.agent, out.prompt, out.text, out.tool_url,
                                   out.reply.latency_seconds, out.reply.attempts});
    } catch (const Error& e) {
      throw PipelineError(e.kind(), "task " + task.name + " failed: " + e.what(), task.name, result.transcript);
    }
  }
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  result.seconds = elapsed.count();
  return result;
}

inline json to_json(const TranscriptEntry& t, bool include_timing = true) {
  json j{{"task", t.task},     {"agent", t.agent},       {"prompt", t.prompt},
         {"output", t.output}, {"tool_url", t.tool_url}, {"attempts", t.attempts}};
  if (include_timing) j["latency_seconds"] = t.latency_seconds;
  return j;
}

inline json to_json(const std::vector<TranscriptEntry>& transcript, bool include_timing = true) {
  json arr = json::array();
  for (const auto& t : transcript) arr.push_back(to_json(t, include_timing));
  return arr;
}

inline json to_json(const PipelineResult& r, bool include_timing = true) {
  json dropped = json::array();
  for (const auto& d : r.dropped_hallucinations) dropped.push_back({{"item", d.item}, {"reason", d.reason}});
  json j{{"recommendations", musrec::to_json(r.recommendations)},
         {"inferred_genres", r.inferred_genres},
         {"transcript", to_json(r.transcript, include_timing)},
         {"dropped_hallucinations", dropped}};
  if (include_timing) j["seconds"] = r.seconds;
  return j;
}

}  // namespace musrec::agents
