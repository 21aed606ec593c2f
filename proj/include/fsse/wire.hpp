#pragma once

// Binary wire protocol and transport. Frames are a 4-byte big-endian body
// length, a 1-byte type tag and the body; update and search bodies mirror
// the scheme message layouts byte for byte, so update frames have constant
// size regardless of history. The server executes requests strictly
// sequentially; the client only advances its keyword state after the server
// acknowledged, and re-sends the identical bytes on retry.

#include "fsse/common.hpp"
#include "fsse/crypto.hpp"
#include "fsse/fast.hpp"
#include "fsse/fastio.hpp"
#include "fsse/store.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>
#include <zlib.h>

#include <atomic>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace fsse::wire {

constexpr uint8_t kTagUpdateFast = 0x01;
constexpr uint8_t kTagUpdateIo = 0x02;
constexpr uint8_t kTagSearchFast = 0x03;
constexpr uint8_t kTagSearchIo = 0x04;
constexpr uint8_t kTagResult = 0x05;
constexpr uint8_t kTagAck = 0x06;
constexpr uint8_t kTagError = 0x07;

constexpr uint8_t kErrSchemeMismatch = 0x01;
constexpr uint8_t kErrMalformed = 0x02;
constexpr uint8_t kErrCorruption = 0x03;
constexpr uint8_t kErrInternal = 0x04;

constexpr size_t kFrameHeaderLen = 5;
constexpr size_t kMaxBodyLen = 1u << 20;

struct Result {
    std::vector<DocId> ids;  // ascending
    bool operator==(const Result&) const = default;
};
struct Ack {
    bool operator==(const Ack&) const = default;
};
struct ErrorMsg {
    uint8_t code = 0;
    std::string message;
    bool operator==(const ErrorMsg&) const = default;
};

using Message = std::variant<FastUpdateMessage, IoUpdateMessage, FastSearchToken, IoSearchToken,
                             Result, Ack, ErrorMsg>;

// ---- encoding -------------------------------------------------------------

namespace detail {

inline Bytes frame(uint8_t tag, std::span<const uint8_t> body) {
    Bytes out(kFrameHeaderLen + body.size());
    put_be32(out.data(), uint32_t(body.size()));
    out[4] = tag;
    std::memcpy(out.data() + kFrameHeaderLen, body.data(), body.size());
    return out;
}

}  // namespace detail

inline Bytes encode(const Message& msg) {
    return std::visit(
        [](const auto& m) -> Bytes {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, FastUpdateMessage>) {
                Bytes body(kAddressLen + kFastPayloadLen);
                std::memcpy(body.data(), m.u.data(), kAddressLen);
                std::memcpy(body.data() + kAddressLen, m.e.data(), kFastPayloadLen);
                return detail::frame(kTagUpdateFast, body);
            } else if constexpr (std::is_same_v<T, IoUpdateMessage>) {
                Bytes body(kAddressLen + kIoPayloadLen);
                std::memcpy(body.data(), m.u.data(), kAddressLen);
                std::memcpy(body.data() + kAddressLen, m.e.data(), kIoPayloadLen);
                return detail::frame(kTagUpdateIo, body);
            } else if constexpr (std::is_same_v<T, FastSearchToken>) {
                Bytes body(kBlockLen * 2 + 8);
                std::memcpy(body.data(), m.t_w.data(), kBlockLen);
                std::memcpy(body.data() + kBlockLen, m.st.data(), kBlockLen);
                put_be64(body.data() + 2 * kBlockLen, m.c);
                return detail::frame(kTagSearchFast, body);
            } else if constexpr (std::is_same_v<T, IoSearchToken>) {
                Bytes body(kBlockLen + 1 + (m.k_w ? kBlockLen : 0) + 8);
                std::memcpy(body.data(), m.t_w.data(), kBlockLen);
                body[kBlockLen] = m.k_w ? 1 : 0;
                size_t off = kBlockLen + 1;
                if (m.k_w) {
                    std::memcpy(body.data() + off, m.k_w->data(), kBlockLen);
                    off += kBlockLen;
                }
                put_be64(body.data() + off, m.c);
                return detail::frame(kTagSearchIo, body);
            } else if constexpr (std::is_same_v<T, Result>) {
                Bytes body(4 + m.ids.size() * kDocIdLen);
                put_be32(body.data(), uint32_t(m.ids.size()));
                for (size_t i = 0; i < m.ids.size(); ++i)
                    put_be64(body.data() + 4 + i * kDocIdLen, m.ids[i]);
                return detail::frame(kTagResult, body);
            } else if constexpr (std::is_same_v<T, Ack>) {
                return detail::frame(kTagAck, {});
            } else {
                Bytes body(1 + m.message.size());
                body[0] = m.code;
                std::memcpy(body.data() + 1, m.message.data(), m.message.size());
                return detail::frame(kTagError, body);
            }
        },
        msg);
}

// Bytes needed for the frame at the start of buf, once the header is
// visible. Oversized frames are rejected immediately.
inline std::optional<size_t> peek_frame(std::span<const uint8_t> buf) {
    if (buf.size() < kFrameHeaderLen) return std::nullopt;
    size_t body = get_be32(buf.data());
    if (body > kMaxBodyLen) throw DecodeError("frame body too large", 0);
    return kFrameHeaderLen + body;
}

struct Decoded {
    Message msg;
    size_t consumed;
};

inline Decoded decode(std::span<const uint8_t> buf) {
    if (buf.size() < kFrameHeaderLen) throw DecodeError("truncated frame header", buf.size());
    size_t body_len = get_be32(buf.data());
    if (body_len > kMaxBodyLen) throw DecodeError("frame body too large", 0);
    uint8_t tag = buf[4];
    if (buf.size() < kFrameHeaderLen + body_len)
        throw DecodeError("truncated frame body", buf.size());
    const uint8_t* body = buf.data() + kFrameHeaderLen;
    size_t consumed = kFrameHeaderLen + body_len;
    auto expect = [&](size_t want) {
        if (body_len != want)
            throw DecodeError("body length mismatch for tag " + std::to_string(tag), 0);
    };
    switch (tag) {
        case kTagUpdateFast: {
            expect(kAddressLen + kFastPayloadLen);
            FastUpdateMessage m;
            std::memcpy(m.u.data(), body, kAddressLen);
            std::memcpy(m.e.data(), body + kAddressLen, kFastPayloadLen);
            return {m, consumed};
        }
        case kTagUpdateIo: {
            expect(kAddressLen + kIoPayloadLen);
            IoUpdateMessage m;
            std::memcpy(m.u.data(), body, kAddressLen);
            std::memcpy(m.e.data(), body + kAddressLen, kIoPayloadLen);
            return {m, consumed};
        }
        case kTagSearchFast: {
            expect(2 * kBlockLen + 8);
            FastSearchToken m;
            std::memcpy(m.t_w.data(), body, kBlockLen);
            std::memcpy(m.st.data(), body + kBlockLen, kBlockLen);
            m.c = get_be64(body + 2 * kBlockLen);
            return {m, consumed};
        }
        case kTagSearchIo: {
            if (body_len != kBlockLen + 1 + 8 && body_len != 2 * kBlockLen + 1 + 8)
                throw DecodeError("body length mismatch for tag 4", 0);
            IoSearchToken m;
            std::memcpy(m.t_w.data(), body, kBlockLen);
            uint8_t flag = body[kBlockLen];
            if (flag > 1) throw DecodeError("bad key-presence flag", kFrameHeaderLen + kBlockLen);
            size_t off = kBlockLen + 1;
            if (flag == 1) {
                if (body_len != 2 * kBlockLen + 1 + 8)
                    throw DecodeError("flagged token too short", 0);
                StateValue k;
                std::memcpy(k.data(), body + off, kBlockLen);
                m.k_w = k;
                off += kBlockLen;
            } else if (body_len != kBlockLen + 1 + 8) {
                throw DecodeError("flagless token too long", 0);
            }
            m.c = get_be64(body + off);
            if (!m.k_w && m.c != 0) throw DecodeError("missing key with nonzero counter", 0);
            if (m.k_w && m.c == 0) throw DecodeError("key present with zero counter", 0);
            return {m, consumed};
        }
        case kTagResult: {
            if (body_len < 4) throw DecodeError("result body too short", 0);
            uint32_t count = get_be32(body);
            if (body_len != 4 + size_t(count) * kDocIdLen)
                throw DecodeError("result count mismatch", 0);
            Result m;
            m.ids.resize(count);
            for (uint32_t i = 0; i < count; ++i) m.ids[i] = get_be64(body + 4 + i * kDocIdLen);
            return {m, consumed};
        }
        case kTagAck:
            expect(0);
            return {Ack{}, consumed};
        case kTagError: {
            if (body_len < 1) throw DecodeError("error body too short", 0);
            ErrorMsg m;
            m.code = body[0];
            m.message.assign(reinterpret_cast<const char*>(body + 1), body_len - 1);
            return {m, consumed};
        }
        default:
            throw DecodeError("unknown tag " + std::to_string(tag), 4);
    }
}

// ---- client state file ---------------------------------------------------
//
//   "FSSE" | version | scheme | key(16) | count(4 BE)
//   { kw_len(2 BE) kw st(16) c(8 BE) }* sorted by keyword | crc32(4 BE)

struct ClientState {
    Scheme scheme = Scheme::Fast;
    SecretKey key{};
    std::map<std::string, KeywordState> sigma;
    bool operator==(const ClientState&) const = default;
};

constexpr char kStateMagic[4] = {'F', 'S', 'S', 'E'};
constexpr uint8_t kStateVersion = 1;

inline Bytes serialize_client_state(const ClientState& s) {
    Bytes out;
    append(out, std::span<const uint8_t>{reinterpret_cast<const uint8_t*>(kStateMagic), 4});
    out.push_back(kStateVersion);
    out.push_back(uint8_t(s.scheme));
    append(out, s.key);
    uint8_t cnt[4];
    put_be32(cnt, uint32_t(s.sigma.size()));
    append(out, cnt);
    for (const auto& [kw, st] : s.sigma) {
        uint8_t kl[2];
        put_be16(kl, uint16_t(kw.size()));
        append(out, kl);
        append(out, as_span(kw));
        append(out, st.st);
        uint8_t c[8];
        put_be64(c, st.c);
        append(out, c);
    }
    uint8_t crc[4];
    put_be32(crc, uint32_t(crc32(0, out.data(), uInt(out.size()))));
    append(out, crc);
    return out;
}

inline ClientState parse_client_state(std::span<const uint8_t> raw) {
    if (raw.size() < 4 + 1 + 1 + 16 + 4 + 4) throw FileFormatError("state file truncated");
    uint32_t want = get_be32(raw.data() + raw.size() - 4);
    if (want != uint32_t(crc32(0, raw.data(), uInt(raw.size() - 4))))
        throw FileFormatError("state checksum mismatch");
    if (std::memcmp(raw.data(), kStateMagic, 4) != 0) throw FileFormatError("bad state magic");
    size_t pos = 4;
    if (raw[pos++] != kStateVersion) throw FileFormatError("unsupported state version");
    uint8_t sb = raw[pos++];
    if (sb > 1) throw FileFormatError("bad scheme byte");
    ClientState s;
    s.scheme = Scheme(sb);
    std::memcpy(s.key.data(), raw.data() + pos, 16);
    pos += 16;
    uint32_t count = get_be32(raw.data() + pos);
    pos += 4;
    const size_t end = raw.size() - 4;
    for (uint32_t i = 0; i < count; ++i) {
        if (pos + 2 > end) throw FileFormatError("state file truncated");
        uint16_t kw_len = get_be16(raw.data() + pos);
        pos += 2;
        if (pos + kw_len + 16 + 8 > end) throw FileFormatError("state file truncated");
        std::string kw(reinterpret_cast<const char*>(raw.data() + pos), kw_len);
        pos += kw_len;
        KeywordState ks;
        std::memcpy(ks.st.data(), raw.data() + pos, 16);
        pos += 16;
        ks.c = get_be64(raw.data() + pos);
        pos += 8;
        if (!s.sigma.emplace(std::move(kw), ks).second)
            throw FileFormatError("duplicate keyword in state file");
    }
    if (pos != end) throw FileFormatError("trailing bytes in state file");
    return s;
}

inline void save_client_state(const std::filesystem::path& path, const ClientState& s) {
    Bytes raw = serialize_client_state(s);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw FileFormatError("cannot open state file for writing: " + path.string());
    f.write(reinterpret_cast<const char*>(raw.data()), std::streamsize(raw.size()));
    if (!f.flush()) throw FileFormatError("state write failed: " + path.string());
}

inline ClientState load_client_state(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FileFormatError("cannot open state file: " + path.string());
    Bytes raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_client_state(raw);
}

// ---- socket helpers --------------------------------------------------------

namespace detail {

inline void send_all(int fd, std::span<const uint8_t> data) {
    size_t sent = 0;
    while (sent < data.size()) {
        ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw TransportError(std::string("send failed: ") + std::strerror(errno));
        }
        sent += size_t(n);
    }
}

inline void recv_all(int fd, uint8_t* out, size_t len) {
    size_t got = 0;
    while (got < len) {
        ssize_t n = ::recv(fd, out + got, len - got, 0);
        if (n == 0) throw TransportError("connection closed by peer");
        if (n < 0) {
            if (errno == EINTR) continue;
            throw TransportError(std::string("recv failed: ") + std::strerror(errno));
        }
        got += size_t(n);
    }
}

inline void set_nodelay(int fd) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

struct AddrInfoFree {
    void operator()(addrinfo* p) const { freeaddrinfo(p); }
};

inline std::unique_ptr<addrinfo, AddrInfoFree> resolve(const std::string& host, uint16_t port,
                                                       bool passive) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    if (passive) hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    int rc = getaddrinfo(host.empty() ? nullptr : host.c_str(), std::to_string(port).c_str(),
                         &hints, &res);
    if (rc != 0) throw TransportError(std::string("getaddrinfo: ") + gai_strerror(rc));
    return std::unique_ptr<addrinfo, AddrInfoFree>(res);
}

}  // namespace detail

inline std::pair<std::string, uint16_t> split_endpoint(const std::string& endpoint) {
    size_t colon = endpoint.rfind(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("endpoint must be host:port, got " + endpoint);
    int port = std::stoi(endpoint.substr(colon + 1));
    if (port < 0 || port > 0xffff) throw std::invalid_argument("port out of range");
    return {endpoint.substr(0, colon), uint16_t(port)};
}

// ---- server -----------------------------------------------------------------

// Accepts any number of connections but executes one request at a time, in
// arrival order, on the thread running the loop. Update requests are applied
// and acknowledged; search requests answer with the sorted result ids.
// Malformed frames, scheme mismatches and state divergence answer with an
// ERROR frame and close the connection; the store is left as it was.
class Server {
public:
    Server(Scheme scheme, EdbStore& store, CryptoProvider& crypto,
           const std::string& host = "127.0.0.1", uint16_t port = 0)
        : scheme_(scheme), store_(&store) {
        if (scheme == Scheme::Fast)
            fast_.emplace(store, crypto);
        else
            io_.emplace(store, crypto);
        auto addr = detail::resolve(host, port, true);
        listen_fd_ = ::socket(addr->ai_family, SOCK_STREAM | SOCK_NONBLOCK, 0);
        if (listen_fd_ < 0) throw TransportError("socket() failed");
        int one = 1;
        ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        if (::bind(listen_fd_, addr->ai_addr, addr->ai_addrlen) != 0) {
            int err = errno;
            ::close(listen_fd_);
            throw TransportError(std::string("bind failed: ") + std::strerror(err));
        }
        if (::listen(listen_fd_, 64) != 0) {
            int err = errno;
            ::close(listen_fd_);
            throw TransportError(std::string("listen failed: ") + std::strerror(err));
        }
        sockaddr_in bound{};
        socklen_t blen = sizeof(bound);
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &blen);
        port_ = ntohs(bound.sin_port);
        int pipefd[2];
        if (::pipe2(pipefd, O_NONBLOCK | O_CLOEXEC) != 0) {
            ::close(listen_fd_);
            throw TransportError("pipe2() failed");
        }
        wake_r_ = pipefd[0];
        wake_w_ = pipefd[1];
    }

    ~Server() {
        stop();
        ::close(listen_fd_);
        ::close(wake_r_);
        ::close(wake_w_);
    }

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    uint16_t port() const { return port_; }

    void start() {
        running_ = true;
        thread_ = std::thread([this] { loop(); });
    }

    void run() {
        running_ = true;
        loop();
    }

    // Async-signal-safe; run()/the loop thread will wind down.
    void request_stop() {
        running_ = false;
        char b = 0;
        [[maybe_unused]] ssize_t n = ::write(wake_w_, &b, 1);
    }

    void stop() {
        request_stop();
        if (thread_.joinable()) thread_.join();
    }

private:
    struct Conn {
        int fd;
        Bytes inbuf;
    };

    void loop() {
        std::vector<Conn> conns;
        while (running_) {
            std::vector<pollfd> fds;
            fds.push_back({wake_r_, POLLIN, 0});
            fds.push_back({listen_fd_, POLLIN, 0});
            for (const Conn& c : conns) fds.push_back({c.fd, POLLIN, 0});
            if (::poll(fds.data(), nfds_t(fds.size()), -1) < 0) {
                if (errno == EINTR) continue;
                break;
            }
            if (fds[0].revents & POLLIN) {
                char sink[16];
                while (::read(wake_r_, sink, sizeof(sink)) > 0) {}
                if (!running_) break;
            }
            if (fds[1].revents & POLLIN) {
                for (;;) {
                    int fd = ::accept(listen_fd_, nullptr, nullptr);
                    if (fd < 0) break;
                    detail::set_nodelay(fd);
                    conns.push_back({fd, {}});
                }
            }
            // poll entries are offset by the wake pipe and the listener;
            // connections accepted above have no entry yet and are kept.
            std::vector<Conn> survivors;
            survivors.reserve(conns.size());
            for (size_t ci = 0; ci < conns.size(); ++ci) {
                size_t fi = ci + 2;
                bool drop = false;
                if (fi < fds.size() && (fds[fi].revents & (POLLIN | POLLHUP | POLLERR)))
                    drop = !pump(conns[ci]);
                if (drop)
                    ::close(conns[ci].fd);
                else
                    survivors.push_back(std::move(conns[ci]));
            }
            conns = std::move(survivors);
        }
        for (Conn& c : conns) ::close(c.fd);
    }

    // Reads what is available and answers every complete frame. Returns
    // false when the connection should be closed.
    bool pump(Conn& conn) {
        bool eof = false;
        for (;;) {
            uint8_t chunk[65536];
            ssize_t n = ::recv(conn.fd, chunk, sizeof(chunk), MSG_DONTWAIT);
            if (n > 0) {
                conn.inbuf.insert(conn.inbuf.end(), chunk, chunk + n);
                if (conn.inbuf.size() > (kMaxBodyLen + kFrameHeaderLen) * 2) break;
                continue;
            }
            if (n == 0) {
                eof = true;
                break;
            }
            if (errno == EAGAIN || errno == EWOULDBLOCK) break;
            if (errno == EINTR) continue;
            eof = true;
            break;
        }
        size_t pos = 0;
        bool keep = true;
        try {
            while (keep) {
                auto need = peek_frame(std::span(conn.inbuf).subspan(pos));
                if (!need || conn.inbuf.size() - pos < *need) break;
                Decoded d = decode(std::span(conn.inbuf).subspan(pos, *need));
                pos += d.consumed;
                keep = respond(conn.fd, d.msg);
            }
        } catch (const DecodeError& e) {
            try {
                detail::send_all(conn.fd, encode(ErrorMsg{kErrMalformed, e.what()}));
            } catch (const TransportError&) {}
            keep = false;
        }
        conn.inbuf.erase(conn.inbuf.begin(), conn.inbuf.begin() + ptrdiff_t(pos));
        return keep && !eof;
    }

    // Returns false when the connection must be closed after this reply.
    bool respond(int fd, const Message& msg) {
        Bytes reply;
        bool keep = true;
        try {
            if (const auto* m = std::get_if<FastUpdateMessage>(&msg)) {
                if (scheme_ != Scheme::Fast) return refuse(fd, "scheme mismatch");
                fast_->apply(*m);
                reply = encode(Ack{});
            } else if (const auto* m = std::get_if<IoUpdateMessage>(&msg)) {
                if (scheme_ != Scheme::FastIo) return refuse(fd, "scheme mismatch");
                io_->apply(*m);
                reply = encode(Ack{});
            } else if (const auto* m = std::get_if<FastSearchToken>(&msg)) {
                if (scheme_ != Scheme::Fast) return refuse(fd, "scheme mismatch");
                SearchOutcome out = fast_->search(*m);
                reply = encode(Result{{out.ids.begin(), out.ids.end()}});
            } else if (const auto* m = std::get_if<IoSearchToken>(&msg)) {
                if (scheme_ != Scheme::FastIo) return refuse(fd, "scheme mismatch");
                SearchOutcome out = io_->search(*m);
                reply = encode(Result{{out.ids.begin(), out.ids.end()}});
            } else {
                return refuse(fd, "unexpected message type");
            }
        } catch (const IntegrityError& e) {
            reply = encode(ErrorMsg{kErrCorruption, e.what()});
            keep = false;
        } catch (const CorruptionError& e) {
            reply = encode(ErrorMsg{kErrCorruption, e.what()});
            keep = false;
        } catch (const std::exception& e) {
            reply = encode(ErrorMsg{kErrInternal, e.what()});
            keep = false;
        }
        try {
            detail::send_all(fd, reply);
        } catch (const TransportError&) {
            return false;
        }
        return keep;
    }

    bool refuse(int fd, const std::string& why) {
        try {
            detail::send_all(fd, encode(ErrorMsg{kErrSchemeMismatch, why}));
        } catch (const TransportError&) {}
        return false;
    }

    Scheme scheme_;
    EdbStore* store_;
    std::optional<FastServer> fast_;
    std::optional<IoServer> io_;
    int listen_fd_ = -1;
    int wake_r_ = -1, wake_w_ = -1;
    uint16_t port_ = 0;
    std::atomic<bool> running_{false};
    std::thread thread_;
};

// ---- client -----------------------------------------------------------------

// Scheme client over the wire. Keyword state only advances once the server
// acknowledged: a failed update keeps its message buffered and a retry with
// the same arguments re-sends the identical bytes (the store accepts the
// byte-identical re-put if the first attempt actually landed). Searches for
// unknown keywords resolve locally without touching the network. When a
// state path is configured, the state file is rewritten after every
// acknowledged mutation.
class Client {
public:
    Client(Scheme scheme, const std::string& host, uint16_t port, CryptoProvider& crypto,
           std::filesystem::path state_path = {})
        : scheme_(scheme), host_(host), port_(port), state_path_(std::move(state_path)) {
        if (!state_path_.empty() && std::filesystem::exists(state_path_)) {
            ClientState s = load_client_state(state_path_);
            if (s.scheme != scheme_) throw FileFormatError("state file is for the other scheme");
            init_from(s, crypto);
        } else {
            if (scheme_ == Scheme::Fast)
                fast_.emplace(FastClient::setup(crypto));
            else
                io_.emplace(IoClient::setup(crypto));
            if (!state_path_.empty()) persist_state();
        }
    }

    Client(const ClientState& s, const std::string& host, uint16_t port, CryptoProvider& crypto,
           std::filesystem::path state_path = {})
        : scheme_(s.scheme), host_(host), port_(port), state_path_(std::move(state_path)) {
        init_from(s, crypto);
    }

    ~Client() { disconnect(); }
    Client(const Client&) = delete;
    Client& operator=(const Client&) = delete;

    void update(std::string_view keyword, DocId ind, Op op) {
        if (pending_) {
            if (pending_->keyword != keyword || pending_->ind != ind || pending_->op != op)
                throw std::logic_error("a failed update must be retried with the same arguments");
        } else {
            Pending p;
            p.keyword = std::string(keyword);
            p.ind = ind;
            p.op = op;
            if (fast_) {
                p.fast = fast_->prepare_update(keyword, ind, op);
                p.frame = encode(p.fast->msg);
            } else {
                p.io = io_->prepare_update(keyword, ind, op);
                p.frame = encode(p.io->msg);
            }
            pending_ = std::move(p);
        }
        Message resp = round_trip(pending_->frame);
        if (std::holds_alternative<Ack>(resp)) {
            if (pending_->fast)
                fast_->commit_update(*pending_->fast);
            else
                io_->commit_update(*pending_->io);
            pending_.reset();
            persist_state();
            return;
        }
        if (const auto* err = std::get_if<ErrorMsg>(&resp)) {
            pending_.reset();  // server refused; neither side advanced
            throw RemoteError(err->code, err->message);
        }
        throw CorruptionError("unexpected response to update");
    }

    std::vector<DocId> search(std::string_view keyword) {
        if (pending_) throw std::logic_error("retry the pending update before searching");
        Bytes frame;
        std::optional<IoClient::PendingSearch> io_pending;
        if (fast_) {
            auto token = fast_->search_token(keyword);
            if (!token) return {};
            frame = encode(*token);
        } else {
            auto prep = io_->prepare_search(keyword);
            if (!prep) return {};
            frame = encode(prep->first);
            io_pending = prep->second;
        }
        Message resp = round_trip(frame);
        if (const auto* res = std::get_if<Result>(&resp)) {
            if (io_pending) {
                bool mutated = io_pending->rotate;
                io_->commit_search(*io_pending);
                if (mutated) persist_state();
            }
            return res->ids;
        }
        if (const auto* err = std::get_if<ErrorMsg>(&resp))
            throw RemoteError(err->code, err->message);
        throw CorruptionError("unexpected response to search");
    }

    bool has_pending_update() const { return pending_.has_value(); }

    ClientState state() const {
        if (fast_) return {scheme_, fast_->key(), fast_->sigma()};
        return {scheme_, io_->key(), io_->sigma()};
    }

    void persist_state() const {
        if (!state_path_.empty()) save_client_state(state_path_, state());
    }

    // Drops the connection; the next call reconnects.
    void disconnect() {
        if (fd_ >= 0) {
            ::close(fd_);
            fd_ = -1;
        }
    }

private:
    struct Pending {
        std::string keyword;
        DocId ind = 0;
        Op op = Op::Add;
        std::optional<FastClient::PendingUpdate> fast;
        std::optional<IoClient::PendingUpdate> io;
        Bytes frame;
    };

    void init_from(const ClientState& s, CryptoProvider& crypto) {
        if (scheme_ == Scheme::Fast) {
            fast_.emplace(s.key, crypto);
            for (const auto& [kw, ks] : s.sigma) fast_->restore_entry(kw, ks);
        } else {
            io_.emplace(s.key, crypto);
            for (const auto& [kw, ks] : s.sigma) io_->restore_entry(kw, ks);
        }
    }

    void connect() {
        auto addr = detail::resolve(host_, port_, false);
        fd_ = ::socket(addr->ai_family, SOCK_STREAM, 0);
        if (fd_ < 0) throw TransportError("socket() failed");
        if (::connect(fd_, addr->ai_addr, addr->ai_addrlen) != 0) {
            int err = errno;
            disconnect();
            throw TransportError(std::string("connect failed: ") + std::strerror(err));
        }
        detail::set_nodelay(fd_);
    }

    Message round_trip(const Bytes& frame) {
        if (fd_ < 0) connect();
        try {
            detail::send_all(fd_, frame);
            uint8_t header[kFrameHeaderLen];
            detail::recv_all(fd_, header, sizeof(header));
            size_t body_len = get_be32(header);
            if (body_len > kMaxBodyLen) {
                disconnect();
                throw DecodeError("oversized response frame", 0);
            }
            Bytes buf(kFrameHeaderLen + body_len);
            std::memcpy(buf.data(), header, kFrameHeaderLen);
            detail::recv_all(fd_, buf.data() + kFrameHeaderLen, body_len);
            return decode(buf).msg;
        } catch (const TransportError&) {
            disconnect();
            throw;
        }
    }

    Scheme scheme_;
    std::string host_;
    uint16_t port_;
    std::filesystem::path state_path_;
    std::optional<FastClient> fast_;
    std::optional<IoClient> io_;
    std::optional<Pending> pending_;
    int fd_ = -1;
};

}  // namespace fsse::wire
