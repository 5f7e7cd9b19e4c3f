#include "crowd/server.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <future>
#include <map>
#include <thread>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "crowd/errors.hpp"

namespace crowd {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

std::int64_t now_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

}  // namespace

class Client;

struct SessionServer::Impl {
    Impl(ScenarioConfig config, std::string ref, ServeOptions opts)
        : options(std::move(opts)), live(std::move(config), std::move(ref), options.engine), acceptor(ioc) {}

    void accept_next();
    void broadcast(std::shared_ptr<const std::string> message);
    void send_to(LiveSession::ClientId id, std::string message);
    void handle(Client& client, const std::string& text);
    void step_loop();

    ServeOptions options;
    LiveSession live;
    asio::io_context ioc{1};
    tcp::acceptor acceptor;
    std::optional<asio::executor_work_guard<asio::io_context::executor_type>> work;
    std::thread io_thread;
    std::thread step_thread;

    std::mutex step_mutex;
    std::condition_variable step_cv;
    bool running = false;
    bool stopped = false;
    unsigned short bound_port = 0;

    std::ofstream record;
    // touched only on the I/O thread
    std::map<LiveSession::ClientId, std::weak_ptr<Client>> clients;
    LiveSession::ClientId next_client = 1;
};

class Client : public std::enable_shared_from_this<Client> {
public:
    Client(tcp::socket socket, SessionServer::Impl& server, LiveSession::ClientId id)
        : ws_(std::move(socket)), server_(server), id_(id) {}

    LiveSession::ClientId id() const { return id_; }

    void start() {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
            if (ec) return;
            self->server_.clients[self->id_] = self;
            self->enqueue(std::make_shared<const std::string>(self->server_.live.world()), false);
            self->read();
        });
    }

    /// Frames are droppable; world and error replies are not.
    void enqueue(std::shared_ptr<const std::string> message, bool droppable) {
        if (closed_) return;
        if (droppable && out_.size() >= server_.options.client_queue) {
            const std::size_t first = writing_ ? 1 : 0;
            for (std::size_t i = first; i < out_.size(); ++i) {
                if (out_[i].droppable) {
                    out_.erase(out_.begin() + static_cast<std::ptrdiff_t>(i));
                    break;
                }
            }
        }
        out_.push_back({std::move(message), droppable});
        if (!writing_) write();
    }

    void close() {
        if (closed_) return;
        closed_ = true;
        beast::error_code ignored;
        beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ignored);
        beast::get_lowest_layer(ws_).close();
    }

private:
    struct Outgoing {
        std::shared_ptr<const std::string> text;
        bool droppable;
    };

    void read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->closed_ = true;
                self->server_.clients.erase(self->id_);
                return;
            }
            const std::string text = beast::buffers_to_string(self->buffer_.data());
            self->buffer_.consume(self->buffer_.size());
            self->server_.handle(*self, text);
            self->read();
        });
    }

    void write() {
        writing_ = true;
        ws_.text(true);
        ws_.async_write(asio::buffer(*out_.front().text), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            self->out_.pop_front();
            if (ec) {
                self->writing_ = false;
                self->out_.clear();
                return;
            }
            if (self->out_.empty() || self->closed_) {
                self->writing_ = false;
            } else {
                self->write();
            }
        });
    }

    websocket::stream<beast::tcp_stream> ws_;
    beast::flat_buffer buffer_;
    std::deque<Outgoing> out_;
    bool writing_ = false;
    bool closed_ = false;
    SessionServer::Impl& server_;
    LiveSession::ClientId id_;
};

void SessionServer::Impl::accept_next() {
    acceptor.async_accept(ioc, [this](beast::error_code ec, tcp::socket socket) {
        if (ec) return;  // acceptor closed
        std::make_shared<Client>(std::move(socket), *this, next_client++)->start();
        accept_next();
    });
}

void SessionServer::Impl::broadcast(std::shared_ptr<const std::string> message) {
    for (auto it = clients.begin(); it != clients.end();) {
        if (auto c = it->second.lock()) {
            c->enqueue(message, true);
            ++it;
        } else {
            it = clients.erase(it);
        }
    }
}

void SessionServer::Impl::send_to(LiveSession::ClientId id, std::string message) {
    const auto it = clients.find(id);
    if (it == clients.end()) return;
    if (auto c = it->second.lock()) c->enqueue(std::make_shared<const std::string>(std::move(message)), false);
}

void SessionServer::Impl::handle(Client& client, const std::string& text) {
    std::optional<std::string> reason;
    try {
        reason = live.submit(parse_client_message(text, now_ms()), client.id());
    } catch (const ParseError& e) {
        reason = e.what();
    }
    if (reason) client.enqueue(std::make_shared<const std::string>(error_message(*reason)), false);
}

void SessionServer::Impl::step_loop() {
    using clock = std::chrono::steady_clock;
    auto next = clock::now();
    std::unique_lock lock(step_mutex);
    while (running) {
        lock.unlock();
        LiveSession::Tick t = live.tick();
        if (t.frame) {
            auto line = std::make_shared<const std::string>(to_json_line(*t.frame));
            if (record.is_open()) record << *line << '\n';
            if (t.frame->step % options.every == 0) asio::post(ioc, [this, line] { broadcast(line); });
        }
        for (LiveSession::Rejection& r : t.rejections) {
            asio::post(ioc, [this, r = std::move(r)] { send_to(r.client, error_message(r.reason)); });
        }
        const auto period = std::chrono::duration_cast<clock::duration>(
            std::chrono::duration<double>(options.step_period / live.speed()));
        next += period;
        const auto now = clock::now();
        if (next < now - 4 * period) next = now;  // do not burst to catch up after a stall
        lock.lock();
        step_cv.wait_until(lock, next, [this] { return !running; });
    }
}

SessionServer::SessionServer(ScenarioConfig config, std::string scenario_ref, ServeOptions options)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(scenario_ref), std::move(options))) {
    if (impl_->options.every < 1) throw ConfigError("broadcast interval must be at least 1");
    if (!(impl_->options.step_period > 0)) throw ConfigError("step period must be positive");
}

SessionServer::~SessionServer() { stop(); }

void SessionServer::start() {
    Impl& s = *impl_;
    const tcp::endpoint endpoint(asio::ip::make_address(s.options.address), s.options.port);
    s.acceptor.open(endpoint.protocol());
    s.acceptor.set_option(asio::socket_base::reuse_address(true));
    s.acceptor.bind(endpoint);
    s.acceptor.listen();
    s.bound_port = s.acceptor.local_endpoint().port();
    if (!s.options.record_path.empty()) {
        s.record.open(s.options.record_path);
        if (!s.record) throw ConfigError("cannot write '" + s.options.record_path + "'");
    }
    s.accept_next();
    s.work.emplace(s.ioc.get_executor());
    s.io_thread = std::thread([&s] { s.ioc.run(); });
    {
        std::lock_guard lock(s.step_mutex);
        s.running = true;
    }
    s.step_thread = std::thread([&s] { s.step_loop(); });
}

void SessionServer::stop() {
    Impl& s = *impl_;
    if (s.stopped || !s.io_thread.joinable()) return;
    s.stopped = true;
    {
        std::lock_guard lock(s.step_mutex);
        s.running = false;
    }
    s.step_cv.notify_all();
    s.step_thread.join();

    std::promise<void> closed;
    asio::post(s.ioc, [&s, &closed] {
        beast::error_code ignored;
        s.acceptor.close(ignored);
        for (auto& [id, weak] : s.clients) {
            if (auto c = weak.lock()) c->close();
        }
        s.clients.clear();
        closed.set_value();
    });
    closed.get_future().wait();
    s.work.reset();
    s.ioc.stop();
    s.io_thread.join();

    if (s.record.is_open()) s.record.close();
    if (!s.options.log_path.empty()) {
        std::ofstream out(s.options.log_path);
        out << to_json(log());
    }
}

void SessionServer::wait_for_signal() {
    asio::io_context signals_ctx;
    asio::signal_set signals(signals_ctx, SIGINT, SIGTERM);
    signals.async_wait([](beast::error_code, int) {});
    signals_ctx.run();
    stop();
}

unsigned short SessionServer::port() const { return impl_->bound_port; }

SessionLog SessionServer::log() const {
    SessionLog log = impl_->live.log();
    log.record_ref = impl_->options.record_path;
    return log;
}

const LiveSession& SessionServer::session() const { return impl_->live; }

}  // namespace crowd
