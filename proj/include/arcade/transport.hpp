#pragma once

#include <cstdint>
#include <memory>
#include <string>

namespace arcade {

// Ordered reliable byte stream; both ends block.
class ByteStream {
public:
    virtual ~ByteStream() = default;
    // Throws TransportError on failure.
    virtual void write_all(const char* data, std::size_t n) = 0;
    // Throws TransportError on EOF/failure.
    virtual void read_exact(char* data, std::size_t n) = 0;

    void write_all(const std::string& s) { write_all(s.data(), s.size()); }
    std::string read_string(std::size_t n) {
        std::string s(n, '\0');
        read_exact(s.data(), n);
        return s;
    }
};

class TcpStream : public ByteStream {
public:
    explicit TcpStream(int fd);
    ~TcpStream() override;
    TcpStream(const TcpStream&) = delete;
    TcpStream& operator=(const TcpStream&) = delete;

    static std::unique_ptr<TcpStream> connect(const std::string& host, int port);

    using ByteStream::write_all;
    void write_all(const char* data, std::size_t n) override;
    void read_exact(char* data, std::size_t n) override;
    void shutdown_write();

private:
    int fd_;
};

class TcpListener {
public:
    explicit TcpListener(int port);  // port 0 picks an ephemeral port
    ~TcpListener();
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    int port() const { return port_; }
    std::unique_ptr<TcpStream> accept();
    void close();

private:
    int fd_;
    int port_;
};

// In-process duplex pipe; make_pipe() returns the two connected ends.
// fail_after_writes injects a one-shot send failure for retry tests.
class InMemoryStream;
std::pair<std::unique_ptr<InMemoryStream>, std::unique_ptr<InMemoryStream>> make_pipe();

class InMemoryStream : public ByteStream {
public:
    ~InMemoryStream() override;
    using ByteStream::write_all;
    void write_all(const char* data, std::size_t n) override;
    void read_exact(char* data, std::size_t n) override;
    void close();
    // Next `count` write_all calls throw after consuming the data (drop).
    void inject_write_failures(int count);

private:
    friend std::pair<std::unique_ptr<InMemoryStream>, std::unique_ptr<InMemoryStream>>
    make_pipe();
    InMemoryStream() = default;
    struct Channel;
    std::shared_ptr<Channel> out_;
    std::shared_ptr<Channel> in_;
    int fail_writes_ = 0;
};

}  // namespace arcade
