// Raw TCP NDJSON transport for Node-side tests: same line protocol the
// server speaks, letting the browser client class run against a live
// server without a WebSocket implementation.

import * as net from "node:net";
import { Transport } from "../src/transport.js";

export class TcpTransport implements Transport {
  private sock: net.Socket;
  private buffer = "";
  private messageHandler: (line: string) => void = () => {};
  private closeHandler: () => void = () => {};

  private constructor(sock: net.Socket) {
    this.sock = sock;
    sock.on("data", (chunk) => {
      this.buffer += chunk.toString("utf-8");
      let idx: number;
      while ((idx = this.buffer.indexOf("\n")) >= 0) {
        const line = this.buffer.slice(0, idx).trim();
        this.buffer = this.buffer.slice(idx + 1);
        if (line) this.messageHandler(line);
      }
    });
    sock.on("close", () => this.closeHandler());
    sock.on("error", () => this.closeHandler());
  }

  static connect(host: string, port: number, timeoutMs = 10_000): Promise<TcpTransport> {
    return new Promise((resolve, reject) => {
      const sock = net.createConnection({ host, port });
      const timer = setTimeout(() => {
        sock.destroy();
        reject(new Error("connect timeout"));
      }, timeoutMs);
      sock.once("connect", () => {
        clearTimeout(timer);
        resolve(new TcpTransport(sock));
      });
      sock.once("error", (err) => {
        clearTimeout(timer);
        reject(err);
      });
    });
  }

  send(line: string): void {
    this.sock.write(line + "\n");
  }

  onMessage(handler: (line: string) => void): void {
    this.messageHandler = handler;
  }

  onClose(handler: () => void): void {
    this.closeHandler = handler;
  }

  close(): void {
    this.sock.end();
    this.sock.destroy();
  }
}
