// Transport abstraction: the cockpit core only needs line-oriented
// send/receive, so the browser uses a WebSocket while tests drive the
// same client over a raw TCP socket.

export interface Transport {
  send(line: string): void;
  onMessage(handler: (line: string) => void): void;
  onClose(handler: () => void): void;
  close(): void;
}

export class WebSocketTransport implements Transport {
  private ws: WebSocket;
  private messageHandler: (line: string) => void = () => {};
  private closeHandler: () => void = () => {};

  constructor(url: string) {
    this.ws = new WebSocket(url);
    this.ws.addEventListener("message", (ev) => {
      const text = typeof ev.data === "string" ? ev.data : "";
      for (const line of text.split("\n")) {
        if (line.trim()) this.messageHandler(line);
      }
    });
    this.ws.addEventListener("close", () => this.closeHandler());
    this.ws.addEventListener("error", () => this.closeHandler());
  }

  ready(): Promise<void> {
    if (this.ws.readyState === WebSocket.OPEN) return Promise.resolve();
    return new Promise((resolve, reject) => {
      this.ws.addEventListener("open", () => resolve(), { once: true });
      this.ws.addEventListener("error", () => reject(new Error("connect failed")), { once: true });
    });
  }

  send(line: string): void {
    this.ws.send(line);
  }

  onMessage(handler: (line: string) => void): void {
    this.messageHandler = handler;
  }

  onClose(handler: () => void): void {
    this.closeHandler = handler;
  }

  close(): void {
    this.ws.close();
  }
}
