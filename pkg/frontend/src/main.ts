import { resolveConfig } from "./config.js";
import { mount } from "./dom.js";
import { ChatSession } from "./session.js";
import { HttpTransport } from "./transport.js";

const config = resolveConfig(window.location.search);
const transport = new HttpTransport(config.serverUrl, config.timeoutMs);
const session = new ChatSession(transport, config);

mount(document.getElementById("app") as HTMLElement, session, config);
