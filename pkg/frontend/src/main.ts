import { CockpitClient } from "./client.js";
import { WebSocketTransport } from "./transport.js";
import { mountCockpit } from "./ui.js";

const params = new URLSearchParams(window.location.search);
const host = params.get("host") ?? window.location.hostname ?? "127.0.0.1";
const port = params.get("port") ?? "8736";

const transport = new WebSocketTransport(`ws://${host}:${port}/`);
const client = new CockpitClient(transport);
mountCockpit(document.getElementById("app")!, client);
