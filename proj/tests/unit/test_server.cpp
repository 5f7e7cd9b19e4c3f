#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>
#include <unistd.h>

#include "crowd/server.hpp"

using namespace crowd;
namespace asio = boost::asio;
namespace beast = boost::beast;
using Json = nlohmann::json;

namespace {

class TestClient {
public:
    explicit TestClient(unsigned short port) : ws_(ioc_) {
        asio::ip::tcp::resolver resolver(ioc_);
        asio::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
        ws_.handshake("127.0.0.1", "/");
    }

    Json next() {
        beast::flat_buffer buffer;
        ws_.read(buffer);
        return Json::parse(beast::buffers_to_string(buffer.data()));
    }

    /// Skips frames until a message of `type` arrives; frames seen on the way
    /// are appended to `frames`.
    Json until(const std::string& type, std::vector<Json>* frames = nullptr) {
        for (;;) {
            Json j = next();
            if (j["type"] == type) return j;
            if (frames && j["type"] == "frame") frames->push_back(std::move(j));
        }
    }

    void send(const std::string& text) { ws_.write(asio::buffer(text)); }

    void close() { ws_.close(beast::websocket::close_code::normal); }

private:
    asio::io_context ioc_;
    beast::websocket::stream<asio::ip::tcp::socket> ws_;
};

std::filesystem::path scratch_dir() {
    auto dir = std::filesystem::temp_directory_path() / ("crowd_server_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    return dir;
}

void check_contiguous(const std::vector<Json>& frames) {
    for (std::size_t i = 1; i < frames.size(); ++i) {
        REQUIRE(frames[i]["step"].get<long>() == frames[i - 1]["step"].get<long>() + 1);
    }
}

}  // namespace

TEST_CASE("live session over websocket") {
    const auto dir = scratch_dir();
    ServeOptions options;
    options.port = 0;
    options.step_period = 1.0 / 240.0;
    options.client_queue = 1 << 20;
    options.record_path = (dir / "stream.jsonl").string();
    options.log_path = (dir / "session.log").string();
    SessionServer server(preset("concert"), "concert", options);
    server.start();
    REQUIRE(server.port() != 0);

    TestClient a(server.port());
    const Json world = a.next();
    CHECK(world["type"] == "world");
    CHECK(world["version"] == 1);
    CHECK(world["areas_of_effect"].size() == 1);
    CHECK(world["markers"].size() > 0);

    std::vector<Json> frames;
    frames.push_back(a.until("frame"));
    CHECK_FALSE(frames.back().contains("markers"));

    {
        // trigger: the frame of the applied step is the first non-idle one
        a.send(R"({"type":"command","kind":"TRIGGER_MOSHPIT","behavior_id":"aoe0"})");
        for (;;) {
            Json f = a.until("frame");
            const std::string phase = f["behaviors"][0]["phase"];
            frames.push_back(f);
            if (phase != "idle") {
                CHECK(phase == "opening");
                break;
            }
        }
        const long opened_at = frames.back()["step"];

        // busy
        a.send(R"({"type":"command","kind":"TRIGGER_CIRCLEPIT","behavior_id":"aoe0"})");
        Json err = a.until("error", &frames);
        CHECK(err["reason"] == "behavior busy");

        // malformed
        a.send("hello there");
        err = a.until("error", &frames);
        CHECK(err["reason"].get<std::string>().find("JSON") != std::string::npos);
        a.send(R"({"type":"set_speed","factor":3})");
        err = a.until("error", &frames);
        CHECK(err["reason"].get<std::string>().find("speed") != std::string::npos);
        frames.push_back(a.until("frame", &frames));

        // a second client connects and leaves; the stream goes on
        {
            TestClient b(server.port());
            CHECK(b.next()["type"] == "world");
            CHECK(b.next()["type"] == "frame");
            b.close();
        }

        // pause / resume
        a.send(R"({"type":"pause"})");
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
        const auto held = server.session().step_index();
        std::this_thread::sleep_for(std::chrono::milliseconds(300));
        CHECK(server.session().step_index() == held);
        CHECK(server.session().paused());
        a.send(R"({"type":"resume"})");
        for (;;) {
            frames.push_back(a.until("frame", &frames));
            if (frames.back()["step"].get<long>() > held + 5) break;
        }
        check_contiguous(frames);
        CHECK(opened_at > 0);

        const SessionLog log = server.log();
        REQUIRE(log.commands.size() == 3);
        CHECK(log.commands[0].kind == CommandKind::TriggerMoshpit);
        CHECK(log.commands[0].applied_at_step == opened_at);
        CHECK(log.commands[1].kind == CommandKind::Pause);
        CHECK(log.commands[2].kind == CommandKind::Resume);
        CHECK(log.commands[2].applied_at_step == held + 1);
    }

    a.close();
    server.stop();

    // the logged session replays to the recorded stream, and broadcast frames
    // are the recorded lines
    const SessionLog log = load_session_log(options.log_path);
    std::vector<std::string> replayed;
    replay(log, [&](const FrameSnapshot& f) { replayed.push_back(to_json_line(f)); });
    std::ifstream in(options.record_path);
    std::vector<std::string> recorded;
    for (std::string line; std::getline(in, line);) recorded.push_back(line);
    CHECK(recorded.size() == static_cast<std::size_t>(log.steps));
    CHECK(replayed == recorded);
    for (const Json& f : frames) {
        const auto step = f["step"].get<std::size_t>();
        REQUIRE(step <= recorded.size());
        CHECK(Json::parse(recorded[step - 1]) == f);
    }
    std::filesystem::remove_all(scratch_dir());
}

TEST_CASE("broadcast every Nth frame") {
    ServeOptions options;
    options.port = 0;
    options.every = 3;
    options.step_period = 1.0 / 240.0;
    SessionServer server(preset("queue1"), "queue1", options);
    server.start();
    TestClient a(server.port());
    CHECK(a.next()["type"] == "world");
    for (int i = 0; i < 5; ++i) CHECK(a.until("frame")["step"].get<long>() % 3 == 0);
    a.close();
    server.stop();
}
