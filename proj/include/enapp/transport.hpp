#pragma once

#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "enapp/partition.hpp"

namespace enapp {

/// One boundary-variable exchange between neighboring areas.
struct Message {
    enum class Kind { Voltage, Power };  // y1 travels downstream, y2 upstream

    int iteration = 0;
    AreaId from;
    AreaId to;
    BoundaryId boundary = 0;
    Kind kind = Kind::Voltage;
    std::vector<double> payload;
};

/// Message passing between area agents. Implementations must be safe to call
/// from concurrent area workers.
class Transport {
public:
    virtual ~Transport() = default;
    virtual void send(Message m) = 0;
    /// Removes and returns everything queued for `to`, in send order.
    virtual std::vector<Message> receive(const AreaId& to) = 0;
};

/// In-process mailbox per recipient.
class QueueTransport : public Transport {
public:
    void send(Message m) override;
    std::vector<Message> receive(const AreaId& to) override;

private:
    std::mutex mutex_;
    std::map<AreaId, std::vector<Message>> inbox_;
};

/// Queue transport that also keeps a copy of every message sent.
class RecordingTransport : public QueueTransport {
public:
    void send(Message m) override;
    std::vector<Message> log() const;

private:
    mutable std::mutex log_mutex_;
    std::vector<Message> log_;
};

}  // namespace enapp
