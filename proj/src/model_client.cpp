#include "itmod/model_client.hpp"

#include <cstdlib>
#include <fstream>

#include <httplib.h>

#include "itmod/util.hpp"

namespace itmod {

ScriptedModelClient ScriptedModelClient::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open script file: " + path.string());
    std::vector<ChatResponse> responses;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const ordered_json row = ordered_json::parse(line);
        ChatResponse response;
        if (row.contains("text")) response.text = row.at("text").get<std::string>();
        if (row.contains("tool_calls")) {
            for (const auto& call : row.at("tool_calls")) {
                ToolCall tc;
                tc.id = call.value("id", "call_" + std::to_string(response.tool_calls.size()));
                tc.name = call.at("name").get<std::string>();
                tc.arguments = call.value("arguments", ordered_json::object());
                response.tool_calls.push_back(std::move(tc));
            }
        }
        responses.push_back(std::move(response));
    }
    return ScriptedModelClient(std::move(responses));
}

ChatResponse ScriptedModelClient::complete(const std::vector<ChatMessage>& messages,
                                           const std::vector<ToolSpec>&) {
    requests_.push_back(messages);
    if (cursor_ >= responses_.size())
        throw TransportError("scripted client exhausted after " + std::to_string(cursor_) +
                             " turns");
    return responses_[cursor_++];
}

ModelConfig ModelConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model config: " + path.string());
    ModelConfig config;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#' || stripped[0] == ';' || stripped[0] == '[')
            continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                              ": expected key = value");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key == "mode") config.mode = value;
        else if (key == "base_url") config.base_url = value;
        else if (key == "path") config.path = value;
        else if (key == "model") config.model = value;
        else if (key == "api_key_env") config.api_key_env = value;
        else if (key == "temperature") config.temperature = std::stod(value);
        else if (key == "transport_retries") config.transport_retries = std::stoi(value);
        else if (key == "timeout_seconds") config.timeout_seconds = std::stoi(value);
        else if (key == "script_path") config.script_path = value;
        else throw ConfigError("unknown model config key: " + key);
    }
    if (config.mode != "http" && config.mode != "scripted")
        throw ConfigError("model config mode must be http or scripted");
    if (config.mode == "http" && config.base_url.empty())
        throw ConfigError("model config: base_url required for http mode");
    if (config.mode == "scripted" && config.script_path.empty())
        throw ConfigError("model config: script_path required for scripted mode");
    return config;
}

ordered_json message_to_json(const ChatMessage& message) {
    ordered_json out;
    out["role"] = message.role;
    out["content"] = message.content;
    if (!message.tool_calls.empty()) {
        ordered_json calls = ordered_json::array();
        for (const auto& call : message.tool_calls) {
            calls.push_back({{"id", call.id},
                             {"type", "function"},
                             {"function",
                              {{"name", call.name}, {"arguments", call.arguments.dump()}}}});
        }
        out["tool_calls"] = calls;
    }
    if (!message.tool_call_id.empty()) out["tool_call_id"] = message.tool_call_id;
    return out;
}

ordered_json tool_spec_to_json(const ToolSpec& spec) {
    return {{"type", "function"},
            {"function",
             {{"name", spec.name},
              {"description", spec.description},
              {"parameters", spec.parameters}}}};
}

HttpModelClient::HttpModelClient(ModelConfig config) : config_(std::move(config)) {
    if (!config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
    }
}

ChatResponse HttpModelClient::complete(const std::vector<ChatMessage>& messages,
                                       const std::vector<ToolSpec>& tools) {
    ordered_json body;
    body["model"] = config_.model;
    body["temperature"] = config_.temperature;
    ordered_json msgs = ordered_json::array();
    for (const auto& message : messages) msgs.push_back(message_to_json(message));
    body["messages"] = msgs;
    if (!tools.empty()) {
        ordered_json specs = ordered_json::array();
        for (const auto& spec : tools) specs.push_back(tool_spec_to_json(spec));
        body["tools"] = specs;
    }

#ifndef ITMOD_HTTPS
    if (config_.base_url.rfind("https://", 0) == 0)
        throw ConfigError("built without TLS support; use an http:// endpoint or a proxy");
#endif

    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    std::string last_error;
    for (int attempt = 0; attempt <= config_.transport_retries; ++attempt) {
        httplib::Client client(config_.base_url);
        client.set_read_timeout(config_.timeout_seconds, 0);
        client.set_connection_timeout(10, 0);
        auto res = client.Post(config_.path, headers, body.dump(), "application/json");
        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "server error " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw TransportError("endpoint returned status " + std::to_string(res->status) +
                                 ": " + res->body);

        const ordered_json reply = ordered_json::parse(res->body);
        const auto& message = reply.at("choices").at(0).at("message");
        ChatResponse response;
        if (message.contains("content") && !message.at("content").is_null())
            response.text = message.at("content").get<std::string>();
        if (message.contains("tool_calls")) {
            for (const auto& call : message.at("tool_calls")) {
                ToolCall tc;
                tc.id = call.value("id", "");
                tc.name = call.at("function").at("name").get<std::string>();
                const std::string args = call.at("function").value("arguments", "{}");
                try {
                    tc.arguments = ordered_json::parse(args);
                } catch (const ordered_json::parse_error&) {
                    tc.arguments = ordered_json{{"_unparseable", args}};
                }
                response.tool_calls.push_back(std::move(tc));
            }
        }
        if (reply.contains("usage")) {
            TokenUsage usage;
            usage.prompt_tokens = reply.at("usage").value("prompt_tokens", 0ULL);
            usage.completion_tokens = reply.at("usage").value("completion_tokens", 0ULL);
            response.usage = usage;
        }
        return response;
    }
    throw TransportError(last_error.empty() ? "transport failure" : last_error);
}

std::unique_ptr<ModelClient> make_client(const ModelConfig& config) {
    if (config.mode == "scripted")
        return std::make_unique<ScriptedModelClient>(
            ScriptedModelClient::from_file(config.script_path));
    return std::make_unique<HttpModelClient>(config);
}

}  // namespace itmod
