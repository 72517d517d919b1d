#pragma once

// Developer-facing xApp handle. Wraps registration, node discovery,
// subscriptions, controls and the non-blocking receive queue of one xApp.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "oranlab/e2_codec.hpp"
#include "oranlab/ric.hpp"

namespace oranlab::sdk {

class XappHandle {
 public:
  // Registers a new xApp with the RIC.
  XappHandle(ric::Ric& ric, const std::string& name);

  ric::XappId id() const { return id_; }
  const std::string& name() const { return name_; }

  std::vector<GnbId> get_gnb_id_list() const;

  // Oldest queued message, or nothing. Never waits on the RIC.
  std::optional<ric::RoutedMessage> get_queued_rx_msg();

  // Throws ric::RicError for a gNB the RIC has never seen.
  ric::RequestToken e2ap_control_request(GnbId gnb, const e2::SmPayload& payload);
  std::uint32_t e2ap_subscribe(GnbId gnb, std::uint32_t period_ms);

  std::uint64_t dropped_messages() const { return queue_->dropped(); }

 private:
  ric::Ric& ric_;
  std::string name_;
  ric::XappId id_;
  std::shared_ptr<ric::XappQueue> queue_;
};

}  // namespace oranlab::sdk
