/**
 * Entry point: service base URL from the ?service= query parameter,
 * falling back to the page origin.
 */

import { ServiceClient } from "./client.js";
import { Console } from "./console.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("service") ?? window.location.origin;
const root = document.getElementById("console");
if (root) {
  void new Console(new ServiceClient(base), root).start();
}
