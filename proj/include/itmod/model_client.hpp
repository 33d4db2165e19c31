#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "itmod/errors.hpp"

namespace itmod {

using ordered_json = nlohmann::ordered_json;

struct ToolCall {
    std::string id;
    std::string name;
    ordered_json arguments;  // structured arguments (already parsed)
};

// Declaration of a callable tool, serialized into the request.
struct ToolSpec {
    std::string name;
    std::string description;
    ordered_json parameters;  // JSON-schema-ish object
};

struct ChatMessage {
    std::string role;  // system | user | assistant | tool
    std::string content;
    std::vector<ToolCall> tool_calls;  // assistant turns only
    std::string tool_call_id;          // tool turns only
};

struct TokenUsage {
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;
};

// One turn: either final text or a batch of tool-call requests.
struct ChatResponse {
    std::string text;
    std::vector<ToolCall> tool_calls;
    std::optional<TokenUsage> usage;

    bool has_tool_calls() const { return !tool_calls.empty(); }
};

class ModelClient {
public:
    virtual ~ModelClient() = default;
    virtual ChatResponse complete(const std::vector<ChatMessage>& messages,
                                  const std::vector<ToolSpec>& tools) = 0;
    virtual bool supports_tools() const { return true; }
    // True for clients whose latency/token numbers are meaningful.
    virtual bool is_live() const { return false; }
};

// Replays a fixed sequence of responses; used by tests and offline runs.
// Records every request it sees.
class ScriptedModelClient : public ModelClient {
public:
    explicit ScriptedModelClient(std::vector<ChatResponse> responses)
        : responses_(std::move(responses)) {}

    // Loads a JSONL script: each line {"text": ...} or
    // {"tool_calls": [{"id","name","arguments"}]}.
    static ScriptedModelClient from_file(const std::filesystem::path& path);

    ChatResponse complete(const std::vector<ChatMessage>& messages,
                          const std::vector<ToolSpec>& tools) override;

    const std::vector<std::vector<ChatMessage>>& requests() const { return requests_; }
    std::size_t cursor() const { return cursor_; }

private:
    std::vector<ChatResponse> responses_;
    std::vector<std::vector<ChatMessage>> requests_;
    std::size_t cursor_ = 0;
};

// Endpoint settings from an INI-style key=value file. Secrets come from the
// environment (api_key_env names the variable), never from the file.
struct ModelConfig {
    std::string mode = "http";  // http | scripted
    std::string base_url;       // e.g. http://host:port
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string api_key_env = "MODEL_API_KEY";
    double temperature = 0.0;
    int transport_retries = 2;
    int timeout_seconds = 120;
    std::string script_path;  // for mode=scripted

    static ModelConfig from_file(const std::filesystem::path& path);
};

// OpenAI-style chat-completions client over HTTP(S).
class HttpModelClient : public ModelClient {
public:
    explicit HttpModelClient(ModelConfig config);
    ChatResponse complete(const std::vector<ChatMessage>& messages,
                          const std::vector<ToolSpec>& tools) override;
    bool is_live() const override { return true; }

private:
    ModelConfig config_;
    std::string api_key_;
};

std::unique_ptr<ModelClient> make_client(const ModelConfig& config);

// Message <-> wire-format JSON used both by the HTTP client and the
// transcript log.
ordered_json message_to_json(const ChatMessage& message);
ordered_json tool_spec_to_json(const ToolSpec& spec);

}  // namespace itmod
