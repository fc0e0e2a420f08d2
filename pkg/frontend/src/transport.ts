// Transports deliver whole JSON messages both ways. The browser build
// uses WebSocket (one message per text frame); the headless test client
// implements the same interface over raw TCP in node (see test/tcp.ts).

import type { ServerMessage } from "./protocol.js";

export interface Transport {
  send(message: object): void;
  close(): void;
  onMessage(handler: (msg: ServerMessage) => void): void;
  onOpen(handler: () => void): void;
  onClose(handler: () => void): void;
}

export class WsTransport implements Transport {
  private ws: WebSocket;
  private messageHandler: ((msg: ServerMessage) => void) | null = null;

  constructor(url: string) {
    this.ws = new WebSocket(url);
    this.ws.onmessage = (ev: MessageEvent) => {
      if (this.messageHandler) this.messageHandler(JSON.parse(ev.data as string));
    };
  }

  send(message: object): void {
    if (this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(JSON.stringify(message));
    }
  }

  close(): void {
    this.ws.close();
  }

  onMessage(handler: (msg: ServerMessage) => void): void {
    this.messageHandler = handler;
  }

  onOpen(handler: () => void): void {
    this.ws.onopen = handler;
  }

  onClose(handler: () => void): void {
    this.ws.onclose = handler;
  }
}
