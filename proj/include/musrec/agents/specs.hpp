#pragma once

// Agent, tool, and task definitions for the four-step recommendation
// pipeline. The strings are loaded from data/agents.json at run time when
// available; kDefaultPipelineSpec is the same document compiled in.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "musrec/domain.hpp"
#include "musrec/error.hpp"

namespace musrec::agents {

using json = nlohmann::json;

struct ToolSpec {
  std::string name;
  std::string description;
  std::string endpoint_template;  // path (and query) relative to the service base URL
  std::optional<std::size_t> result_limit;
};

struct AgentSpec {
  std::string name;
  std::string role;
  std::string goal;
  std::string backstory;
  std::optional<std::string> tool;
};

struct TaskSpec {
  std::string name;
  std::string agent;
  std::string description;  // may contain {url}
  std::string expected_output;
  std::vector<std::string> context;  // names of earlier tasks whose output this task reads
};

// Task names the pipeline expects, in execution order.
inline constexpr std::string_view kReadCatalogue = "read_catalogue";
inline constexpr std::string_view kReadHistory = "read_history";
inline constexpr std::string_view kInferGenres = "infer_genres";
inline constexpr std::string_view kRecommendSongs = "recommend_songs";
inline constexpr std::string_view kTaskOrder[] = {kReadCatalogue, kReadHistory, kInferGenres, kRecommendSongs};

class PipelineSpec {
 public:
  PipelineSpec(std::vector<ToolSpec> tools, std::vector<AgentSpec> agents, std::vector<TaskSpec> tasks)
      : tools_(std::move(tools)), agents_(std::move(agents)), tasks_(std::move(tasks)) {
    validate();
  }

  static PipelineSpec from_json(const json& j) {
    try {
      std::vector<ToolSpec> tools;
      for (const auto& t : j.at("tools")) {
        ToolSpec s{t.at("name").get<std::string>(), t.at("description").get<std::string>(),
                   t.at("endpoint_template").get<std::string>(), std::nullopt};
        if (auto it = t.find("result_limit"); it != t.end() && !it->is_null()) {
          s.result_limit = it->get<std::size_t>();
        }
        tools.push_back(std::move(s));
      }
      std::vector<AgentSpec> agents;
      for (const auto& a : j.at("agents")) {
        AgentSpec s{a.at("name").get<std::string>(), a.at("role").get<std::string>(),
                    a.at("goal").get<std::string>(), a.at("backstory").get<std::string>(), std::nullopt};
        if (auto it = a.find("tool"); it != a.end() && !it->is_null()) s.tool = it->get<std::string>();
        agents.push_back(std::move(s));
      }
      std::vector<TaskSpec> tasks;
      for (const auto& t : j.at("tasks")) {
        tasks.push_back({t.at("name").get<std::string>(), t.at("agent").get<std::string>(),
                         t.at("description").get<std::string>(), t.at("expected_output").get<std::string>(),
                         t.value("context", std::vector<std::string>{})});
      }
      return PipelineSpec(std::move(tools), std::move(agents), std::move(tasks));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Parse, std::string("bad pipeline spec: ") + e.what());
    }
  }

  static PipelineSpec load(const std::string& path) {
    try {
      return from_json(json::parse(read_file(path)));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::Parse, path + ": " + e.what());
    }
  }

  static PipelineSpec defaults();

  const std::vector<ToolSpec>& tools() const { return tools_; }
  const std::vector<AgentSpec>& agents() const { return agents_; }
  const std::vector<TaskSpec>& tasks() const { return tasks_; }

  const AgentSpec& agent(const std::string& name) const {
    for (const auto& a : agents_) {
      if (a.name == name) return a;
    }
    throw Error(ErrorKind::ContractViolation, "unknown agent " + name);
  }

  const ToolSpec& tool(const std::string& name) const {
    for (const auto& t : tools_) {
      if (t.name == name) return t;
    }
    throw Error(ErrorKind::ContractViolation, "unknown tool " + name);
  }

 private:
  void validate() const {
    if (tasks_.size() != std::size(kTaskOrder)) {
      throw Error(ErrorKind::ContractViolation, "pipeline spec must define exactly four tasks");
    }
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
      const auto& task = tasks_[i];
      if (task.name != kTaskOrder[i]) {
        throw Error(ErrorKind::ContractViolation,
                    "task " + std::to_string(i + 1) + " must be " + std::string(kTaskOrder[i]));
      }
      const auto& a = agent(task.agent);
      if (a.goal.empty() || a.backstory.empty()) {
        throw Error(ErrorKind::ContractViolation, "agent " + a.name + " needs a goal and backstory");
      }
      if (a.tool) tool(*a.tool);
      for (const auto& dep : task.context) {
        bool earlier = false;
        for (std::size_t k = 0; k < i; ++k) earlier = earlier || tasks_[k].name == dep;
        if (!earlier) {
          throw Error(ErrorKind::ContractViolation, "task " + task.name + " reads non-earlier task " + dep);
        }
      }
    }
  }

  std::vector<ToolSpec> tools_;
  std::vector<AgentSpec> agents_;
  std::vector<TaskSpec> tasks_;
};

inline constexpr std::string_view kDefaultPipelineSpec = R"JSON({
  "tools": [
    {
      "name": "GetMusicCatalogueTool",
      "description": "Fetches the music data from a given URL and returns it as a list of dictionaries.",
      "endpoint_template": "/getAllDataEniac?limit=300",
      "result_limit": null
    },
    {
      "name": "GetUserHistoryDataTool",
      "description": "Fetches the user listening history from a given URL and returns the first 30 items as a list.",
      "endpoint_template": "/getUserData/{user_id}",
      "result_limit": 30
    }
  ],
  "agents": [
    {
      "name": "ReadingAgt",
      "role": "Song Catalogue Reader",
      "goal": "Read all the songs from a catalogue.",
      "backstory": "Specializes in handling and returning a song catalogue.",
      "tool": "GetMusicCatalogueTool"
    },
    {
      "name": "AnalistAgt",
      "role": "User Music History Reader",
      "goal": "Read all a music history from an user.",
      "backstory": "Specializes in handling and returning a music history.",
      "tool": "GetUserHistoryDataTool"
    },
    {
      "name": "ExtractAgt",
      "role": "User Music Genres",
      "goal": "Inferring the user's favorite music genre.",
      "backstory": "Specializes in analysing the user music history to infer their 5 favorite music genres.",
      "tool": null
    },
    {
      "name": "RecommendAgt",
      "role": "Content-Based Music Recommender",
      "goal": "Recommend songs to a user using their listening histories.",
      "backstory": "You are a personalized music recommender. You analyze song genres and recommend tracks using content-based filtering techniques.",
      "tool": null
    }
  ],
  "tasks": [
    {
      "name": "read_catalogue",
      "agent": "ReadingAgt",
      "description": "Read and return all the song catalogue at this URL: {url}.",
      "expected_output": "Song Catalogue",
      "context": []
    },
    {
      "name": "read_history",
      "agent": "AnalistAgt",
      "description": "Read and return the user music history at this URL: {url}",
      "expected_output": "User listening history",
      "context": ["read_catalogue"]
    },
    {
      "name": "infer_genres",
      "agent": "ExtractAgt",
      "description": "Infer the user's favorite music genres. Use the user's listening history to identify their 5 most preferred music genres.",
      "expected_output": "User Music Genres",
      "context": ["read_history"]
    },
    {
      "name": "recommend_songs",
      "agent": "RecommendAgt",
      "description": "Generate a list of 20 recommended songs from the catalogue. Use the user's listening history and inferred genres to build a personalized profile. Select songs that match the user's musical preferences. Return a JSON list with genre, song_name and artist_name, along with liked and known flags.",
      "expected_output": "Recommended Songs for the user",
      "context": ["read_catalogue", "read_history", "infer_genres"]
    }
  ]
}
)JSON";

inline PipelineSpec PipelineSpec::defaults() { return from_json(json::parse(kDefaultPipelineSpec)); }

}  // namespace musrec::agents
